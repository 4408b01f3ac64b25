// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "pointcloud/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ssmflow::pc {

namespace {

void require_points(const Tensor& t, const char* op) {
  if (t.dim() != 2 || t.cols() != 3) {
    throw DimensionError(std::string(op) + ": expected [N x 3] coordinates, got " + shape_str(t.shape()));
  }
}

double sq_dist(std::span<const double> a, std::size_t i, std::span<const double> b, std::size_t j) {
  const double dx = a[3 * i] - b[3 * j];
  const double dy = a[3 * i + 1] - b[3 * j + 1];
  const double dz = a[3 * i + 2] - b[3 * j + 2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<std::size_t> farthest_point_sample(const Tensor& coords, std::size_t count) {
  require_points(coords, "farthest_point_sample");
  const std::size_t n = coords.rows();
  if (count == 0 || count > n) {
    throw DomainError("farthest_point_sample: cannot pick " + std::to_string(count) + " of " +
                      std::to_string(n) + " points");
  }
  auto c = coords.data();
  std::size_t seed = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::lexicographical_compare(c.begin() + 3 * i, c.begin() + 3 * i + 3, c.begin() + 3 * seed,
                                     c.begin() + 3 * seed + 3)) {
      seed = i;
    }
  }
  std::vector<std::size_t> picked{seed};
  picked.reserve(count);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t last = seed;
  while (picked.size() < count) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], sq_dist(c, i, c, last));
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    picked.push_back(best);
    last = best;
  }
  return picked;
}

std::vector<std::size_t> knn(const Tensor& query, const Tensor& ref, std::size_t k) {
  require_points(query, "knn");
  require_points(ref, "knn");
  const std::size_t m = query.rows(), n = ref.rows();
  if (k == 0 || k > n) {
    throw DomainError("knn: k=" + std::to_string(k) + " invalid for " + std::to_string(n) + " reference points");
  }
  auto qd = query.data(), rd = ref.data();
  std::vector<std::size_t> out(m * k);
  std::vector<std::size_t> order(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist[j] = sq_dist(qd, i, rd, j);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
    std::copy_n(order.begin(), k, out.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  return out;
}

SetConvParams SetConvParams::make(ParamStore& store, const std::string& name, std::size_t in_feats,
                                  const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<std::size_t> widths{in_feats + 3};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  SetConvParams p;
  p.mlp = Mlp::make(store, name + ".mlp", widths, rng, Activation::kSilu, Activation::kSilu);
  p.weight = Linear::make(store, name + ".weight", 3, 1, rng);
  return p;
}

Tensor set_aggregate(const Tensor& centers, const Tensor& coords, const Tensor& feats,
                     std::span<const std::size_t> index, std::size_t k, const SetConvParams& params,
                     Reduce mode) {
  require_points(centers, "set_aggregate");
  require_points(coords, "set_aggregate");
  if (k == 0) throw ContractError("set_aggregate: at least one neighbour is required");
  const std::size_t m = centers.rows();
  if (index.size() != m * k) {
    throw DimensionError("set_aggregate: " + std::to_string(index.size()) + " neighbour indices for " +
                         std::to_string(m) + " centres of " + std::to_string(k));
  }
  std::vector<std::size_t> repeat(m * k);
  for (std::size_t i = 0; i < m * k; ++i) repeat[i] = i / k;
  Tensor offsets = sub(gather_rows(coords, index), gather_rows(centers, repeat));
  Tensor input = feats.defined() ? concat_cols({gather_rows(feats, index), offsets}) : offsets;
  Tensor per_nbr = params.mlp(input);
  if (mode == Reduce::kMaxPool) return group_max(per_nbr, k);
  Tensor w = scale(params.weight(offsets), 1.0 / static_cast<double>(k));
  return group_weighted_sum(per_nbr, w, k);
}

Tensor set_aggregate(const Tensor& center, const Tensor& nbr_coords, const Tensor& nbr_feats,
                     const SetConvParams& params, Reduce mode) {
  if (nbr_coords.dim() != 2 || nbr_coords.rows() == 0) {
    throw ContractError("set_aggregate: at least one neighbour is required");
  }
  const std::size_t k = nbr_coords.rows();
  if (nbr_feats.defined() && nbr_feats.rows() != k) {
    throw DimensionError("set_aggregate: neighbour coords " + shape_str(nbr_coords.shape()) + " and feats " +
                         shape_str(nbr_feats.shape()) + " differ");
  }
  if (center.numel() != 3) throw DimensionError("set_aggregate: centre must have 3 coordinates");
  Tensor centers = center.dim() == 2 ? center : Tensor::from({1, 3}, {center.at(0), center.at(1), center.at(2)});
  if (center.dim() != 2 && center.requires_grad()) {
    throw ContractError("set_aggregate: pass a [1 x 3] centre to differentiate through it");
  }
  std::vector<std::size_t> index(k);
  std::iota(index.begin(), index.end(), std::size_t{0});
  Tensor out = set_aggregate(centers, nbr_coords, nbr_feats, index, k, params, mode);
  return out;
}

CostVolumeParams CostVolumeParams::make(ParamStore& store, const std::string& name, std::size_t feat,
                                        std::size_t out, Rng& rng) {
  return {Mlp::make(store, name + ".mlp", {2 * feat + 3, out, out}, rng, Activation::kSilu, Activation::kSilu)};
}

Tensor cost_volume(const Tensor& p, const Tensor& f, const Tensor& q, const Tensor& g, std::size_t k,
                   const CostVolumeParams& params) {
  require_points(p, "cost_volume");
  require_points(q, "cost_volume");
  if (f.rows() != p.rows() || g.rows() != q.rows()) {
    throw DimensionError("cost_volume: features do not align with coordinates");
  }
  const std::size_t n = p.rows();
  auto index = knn(p, q, k);
  std::vector<std::size_t> repeat(n * k);
  for (std::size_t i = 0; i < n * k; ++i) repeat[i] = i / k;
  Tensor offsets = sub(gather_rows(q, index), gather_rows(p, repeat));
  Tensor pairs = concat_cols({gather_rows(f, repeat), gather_rows(g, index), offsets});
  return group_max(params.mlp(pairs), k);
}

Tensor warp(const Tensor& p, const Tensor& flow) {
  require_points(p, "warp");
  if (flow.shape() != p.shape()) {
    throw DimensionError("warp: flow " + shape_str(flow.shape()) + " does not match points " + shape_str(p.shape()));
  }
  return add(p, flow);
}

UpsampleWeights upsample_weights(const Tensor& sparse_coords, const Tensor& dense_coords, std::size_t k) {
  UpsampleWeights out;
  out.index = knn(dense_coords, sparse_coords, k);
  const std::size_t n = dense_coords.rows();
  out.weights.resize(n * k);
  auto dd = dense_coords.data(), sd = sparse_coords.data();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = std::sqrt(sq_dist(dd, i, sd, out.index[i * k + j]));
      out.weights[i * k + j] = 1.0 / (d + 1e-8);
      total += out.weights[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) out.weights[i * k + j] /= total;
  }
  return out;
}

Tensor upsample(const Tensor& sparse_coords, const Tensor& dense_coords, const Tensor& values, std::size_t k) {
  require_points(sparse_coords, "upsample");
  require_points(dense_coords, "upsample");
  if (values.dim() != 2 || values.rows() != sparse_coords.rows()) {
    throw DimensionError("upsample: values " + shape_str(values.shape()) + " do not match sparse points " +
                         shape_str(sparse_coords.shape()));
  }
  auto w = upsample_weights(sparse_coords, dense_coords, k);
  const std::size_t count = w.weights.size();
  Tensor weights = Tensor::from({count}, std::move(w.weights));
  return group_weighted_sum(gather_rows(values, w.index), weights, k);
}

MetricsReport evaluate(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape() || pred.dim() != 2 || pred.cols() != 3) {
    throw DimensionError("evaluate: prediction " + shape_str(pred.shape()) + " vs ground truth " +
                         shape_str(gt.shape()));
  }
  const std::size_t n = pred.rows();
  auto pd = pred.data(), gd = gt.data();
  MetricsReport r;
  std::size_t strict = 0, relax = 0, outlier = 0;
  double epe_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double err = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double e = pd[3 * i + j] - gd[3 * i + j];
      err += e * e;
      norm += gd[3 * i + j] * gd[3 * i + j];
    }
    err = std::sqrt(err);
    const double rel = err / (std::sqrt(norm) + 1e-4);
    epe_sum += err;
    if (err < 0.05 || rel < 0.05) ++strict;
    if (err < 0.1 || rel < 0.1) ++relax;
    if (err > 0.3 || rel > 0.1) ++outlier;
  }
  const double dn = static_cast<double>(n);
  r.epe3d = epe_sum / dn;
  r.acc3ds = static_cast<double>(strict) / dn;
  r.acc3dr = static_cast<double>(relax) / dn;
  r.outliers = static_cast<double>(outlier) / dn;
  return r;
}

}  // namespace ssmflow::pc
