// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "pipeline/scene.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tensor/nn.hpp"

namespace ssmflow {

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;

Vec3 random_axis(Rng& rng) {
  for (;;) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-6) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

// Rodrigues rotation about a unit axis.
Mat3 rotation(const Vec3& u, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {t * u[0] * u[0] + c,        t * u[0] * u[1] - s * u[2], t * u[0] * u[2] + s * u[1],
          t * u[0] * u[1] + s * u[2], t * u[1] * u[1] + c,        t * u[1] * u[2] - s * u[0],
          t * u[0] * u[2] - s * u[1], t * u[1] * u[2] + s * u[0], t * u[2] * u[2] + c};
}

Vec3 mat_apply(const Mat3& r, const Vec3& p) {
  return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2], r[3] * p[0] + r[4] * p[1] + r[5] * p[2],
          r[6] * p[0] + r[7] * p[1] + r[8] * p[2]};
}

Vec3 scaled_direction(Rng& rng, double length) {
  Vec3 u = random_axis(rng);
  return {u[0] * length, u[1] * length, u[2] * length};
}

std::vector<Vec3> sample_box(Rng& rng, std::size_t n) {
  const Vec3 centre{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
  const Vec3 half{rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3)};
  std::vector<Vec3> pts(n);
  for (auto& p : pts) {
    const std::size_t face = rng.index(6), axis = face / 2;
    for (std::size_t j = 0; j < 3; ++j) p[j] = centre[j] + half[j] * rng.uniform(-1.0, 1.0);
    p[axis] = centre[axis] + (face % 2 ? half[axis] : -half[axis]);
  }
  return pts;
}

std::vector<Vec3> sample_plane(Rng& rng, std::size_t n) {
  const Vec3 centre{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
  const double w = rng.uniform(0.2, 0.5), h = rng.uniform(0.2, 0.5);
  const Mat3 r = rotation(random_axis(rng), rng.uniform(0.0, std::numbers::pi));
  std::vector<Vec3> pts(n);
  for (auto& p : pts) {
    Vec3 local = mat_apply(r, {w * rng.uniform(-1.0, 1.0), h * rng.uniform(-1.0, 1.0), 0.0});
    for (std::size_t j = 0; j < 3; ++j) p[j] = centre[j] + local[j];
  }
  return pts;
}

std::vector<Vec3> sample_rod(Rng& rng, std::size_t n) {
  const Vec3 centre{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
  const Vec3 dir = scaled_direction(rng, rng.uniform(0.25, 0.6));
  std::vector<Vec3> pts(n);
  for (auto& p : pts) {
    const double t = rng.uniform(-1.0, 1.0);
    for (std::size_t j = 0; j < 3; ++j) p[j] = centre[j] + t * dir[j] + 0.01 * rng.normal();
  }
  return pts;
}

Tensor to_tensor(const std::vector<Vec3>& pts) {
  std::vector<double> v;
  v.reserve(pts.size() * 3);
  for (const auto& p : pts) v.insert(v.end(), p.begin(), p.end());
  return Tensor::from({pts.size(), 3}, std::move(v));
}

std::string fmt(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::vector<std::vector<double>> read_rows(const std::string& path, std::size_t width) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scene file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row(width);
    for (auto& x : row) {
      if (!(ss >> x)) {
        throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) + " numbers");
      }
    }
    std::string extra;
    if (ss >> extra) throw IoError(path + ":" + std::to_string(lineno) + ": trailing text '" + extra + "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("scene file '" + path + "' has no points");
  return rows;
}

}  // namespace

Transform parse_transform(const std::string& name) {
  if (name == "identity") return Transform::kIdentity;
  if (name == "translate") return Transform::kTranslate;
  if (name == "rotate30") return Transform::kRotate30;
  if (name == "rigid") return Transform::kRigid;
  throw ConfigError("unknown transform '" + name + "' (expected identity, translate, rotate30, rigid)");
}

std::string to_string(Transform t) {
  switch (t) {
    case Transform::kIdentity: return "identity";
    case Transform::kTranslate: return "translate";
    case Transform::kRotate30: return "rotate30";
    case Transform::kRigid: return "rigid";
  }
  return "?";
}

void SceneSpec::validate() const {
  if (objects == 0) throw ConfigError("scene needs at least one object");
  if (points < 4 * objects) {
    throw ConfigError("scene needs at least 4 points per object, got " + std::to_string(points) + " for " +
                      std::to_string(objects) + " objects");
  }
  if (!(magnitude >= 0.0)) throw ConfigError("motion magnitude must be non-negative");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (!(occlusion >= 0.0 && occlusion < 1.0)) throw ConfigError("occlusion must lie in [0, 1)");
}

SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<Vec3> src, dst;
  src.reserve(spec.points);

  const Vec3 global_shift = scaled_direction(rng, spec.magnitude);
  const Mat3 global_rot = rotation(random_axis(rng), std::numbers::pi / 6.0);

  for (std::size_t o = 0; o < spec.objects; ++o) {
    const std::size_t n = spec.points / spec.objects + (o < spec.points % spec.objects ? 1 : 0);
    std::vector<Vec3> pts;
    switch (o % 3) {
      case 0: pts = sample_box(rng, n); break;
      case 1: pts = sample_plane(rng, n); break;
      default: pts = sample_rod(rng, n); break;
    }
    Vec3 centroid{0, 0, 0};
    for (const auto& p : pts) {
      for (std::size_t j = 0; j < 3; ++j) centroid[j] += p[j] / static_cast<double>(n);
    }
    const Mat3 rot = rotation(random_axis(rng), rng.uniform(0.0, std::numbers::pi / 6.0));
    const Vec3 shift = scaled_direction(rng, rng.uniform(0.0, spec.magnitude));
    for (const auto& p : pts) {
      Vec3 q = p;
      switch (spec.transform) {
        case Transform::kIdentity: break;
        case Transform::kTranslate:
          for (std::size_t j = 0; j < 3; ++j) q[j] = p[j] + global_shift[j];
          break;
        case Transform::kRotate30: q = mat_apply(global_rot, p); break;
        case Transform::kRigid: {
          Vec3 rel{p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]};
          Vec3 r = mat_apply(rot, rel);
          for (std::size_t j = 0; j < 3; ++j) q[j] = centroid[j] + r[j] + shift[j];
          break;
        }
      }
      src.push_back(p);
      dst.push_back(q);
    }
  }

  // Shuffle so object membership is not encoded in point order.
  for (std::size_t i = src.size(); i > 1; --i) {
    const std::size_t j = rng.index(i);
    std::swap(src[i - 1], src[j]);
    std::swap(dst[i - 1], dst[j]);
  }

  SyntheticScene scene;
  scene.spec = spec;
  scene.seed = seed;
  scene.source = to_tensor(src);
  std::vector<double> flow(src.size() * 3);
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      flow[3 * i + j] = dst[i][j] - src[i][j];
      // Round-trip so the target equals source + flow bit for bit.
      dst[i][j] = src[i][j] + flow[3 * i + j];
    }
  }
  scene.flow = Tensor::from({src.size(), 3}, std::move(flow));

  if (spec.noise > 0.0) {
    for (auto& q : dst) {
      for (auto& x : q) x += spec.noise * rng.normal();
    }
  }
  if (spec.occlusion > 0.0) {
    const auto drop = static_cast<std::size_t>(spec.occlusion * static_cast<double>(dst.size()));
    std::vector<bool> dropped(dst.size(), false);
    for (std::size_t d = 0; d < drop;) {
      const std::size_t i = rng.index(dst.size());
      if (!dropped[i]) {
        dropped[i] = true;
        ++d;
      }
    }
    std::vector<Vec3> kept;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (!dropped[i]) kept.push_back(dst[i]);
    }
    dst = std::move(kept);
  }
  scene.target = to_tensor(dst);
  return scene;
}

void write_scene(const SyntheticScene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write scene file '" + path + "'");
  out << "# seed=" << scene.seed << "\n";
  const std::size_t n = scene.source.rows();
  auto s = scene.source.data(), f = scene.flow.data();
  for (std::size_t i = 0; i < n; ++i) {
    out << fmt(s[3 * i]) << ' ' << fmt(s[3 * i + 1]) << ' ' << fmt(s[3 * i + 2]) << ' ' << fmt(f[3 * i]) << ' '
        << fmt(f[3 * i + 1]) << ' ' << fmt(f[3 * i + 2]) << '\n';
  }
  if (!out) throw IoError("failed writing scene file '" + path + "'");

  bool exact = scene.target.shape() == scene.source.shape();
  auto t = scene.target.data();
  for (std::size_t i = 0; exact && i < t.size(); ++i) exact = t[i] == s[i] + f[i];
  const std::string sidecar = path + ".target";
  if (exact) {
    std::remove(sidecar.c_str());
    return;
  }
  std::ofstream tout(sidecar, std::ios::binary);
  if (!tout) throw IoError("cannot write scene file '" + sidecar + "'");
  for (std::size_t i = 0; i < scene.target.rows(); ++i) {
    tout << fmt(t[3 * i]) << ' ' << fmt(t[3 * i + 1]) << ' ' << fmt(t[3 * i + 2]) << '\n';
  }
  if (!tout) throw IoError("failed writing scene file '" + sidecar + "'");
}

SyntheticScene read_scene(const std::string& path) {
  auto rows = read_rows(path, 6);
  SyntheticScene scene;
  {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (first.rfind("# seed=", 0) == 0) {
      try {
        scene.seed = std::stoull(first.substr(7));
      } catch (const std::exception&) {
        throw IoError(path + ":1: malformed seed line");
      }
    }
  }
  const std::size_t n = rows.size();
  std::vector<double> src(3 * n), flow(3 * n), dst(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      src[3 * i + j] = rows[i][j];
      flow[3 * i + j] = rows[i][3 + j];
      dst[3 * i + j] = rows[i][j] + rows[i][3 + j];
    }
  }
  scene.source = Tensor::from({n, 3}, std::move(src));
  scene.flow = Tensor::from({n, 3}, std::move(flow));
  scene.spec.points = n;
  if (std::ifstream(path + ".target")) {
    auto trows = read_rows(path + ".target", 3);
    std::vector<double> t;
    for (const auto& r : trows) t.insert(t.end(), r.begin(), r.end());
    scene.target = Tensor::from({trows.size(), 3}, std::move(t));
  } else {
    scene.target = Tensor::from({n, 3}, std::move(dst));
  }
  return scene;
}

}  // namespace ssmflow
