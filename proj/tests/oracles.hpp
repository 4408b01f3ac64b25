// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors
//
// Reference implementations used as test oracles. Everything here works on
// plain vectors with explicit loops and never calls the library's kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "pointcloud/pointcloud.hpp"
#include "tensor/nn.hpp"
#include "tensor/tensor.hpp"

namespace oracle {

using ssmflow::Activation;
using ssmflow::Tensor;

inline Tensor random_tensor(ssmflow::Shape shape, ssmflow::Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::vector<double> v(ssmflow::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  auto x = a.data(), y = b.data();
  if (x.size() != y.size()) return std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(x[i] - y[i]);
    if (!(d <= m)) m = d;  // keeps NaN
  }
  return m;
}

inline double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

/// max |a - b| / max(max |b|, 1e-300).
inline double rel_diff(const Tensor& a, const Tensor& ref) {
  return max_abs_diff(a, ref) / std::max(max_abs(ref), 1e-300);
}

inline double act(double x, Activation kind) {
  switch (kind) {
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::kTanh: return std::tanh(x);
    case Activation::kSilu: return x / (1.0 + std::exp(-x));
    case Activation::kSoftplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kIdentity: return x;
  }
  return x;
}

inline std::vector<double> linear(const std::vector<double>& x, const ssmflow::Linear& l) {
  const std::size_t in = l.weight.rows(), out = l.weight.cols();
  std::vector<double> y(out, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    double s = l.bias.defined() ? l.bias.at(o) : 0.0;
    for (std::size_t i = 0; i < in; ++i) s += x[i] * l.weight.at(i, o);
    y[o] = s;
  }
  return y;
}

inline std::vector<double> mlp(std::vector<double> x, const ssmflow::Mlp& m) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    x = linear(x, m.layers[i]);
    const Activation a = i + 1 == m.layers.size() ? m.last : m.hidden;
    for (double& v : x) v = act(v, a);
  }
  return x;
}

inline double sq_dist(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = a.at(i, c) - b.at(j, c);
    s += d * d;
  }
  return s;
}

/// Greedy max-min selection recomputed from scratch at every pick.
inline std::vector<std::size_t> fps(const Tensor& pts, std::size_t m) {
  const std::size_t n = pts.rows();
  std::size_t seed = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::vector<double> a{pts.at(i, 0), pts.at(i, 1), pts.at(i, 2)};
    const std::vector<double> b{pts.at(seed, 0), pts.at(seed, 1), pts.at(seed, 2)};
    if (a < b) seed = i;
  }
  std::vector<std::size_t> picked{seed};
  while (picked.size() < m) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t p : picked) d = std::min(d, sq_dist(pts, i, pts, p));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    picked.push_back(best);
  }
  return picked;
}

/// Full sort of every reference point by (distance, index).
inline std::vector<std::size_t> knn(const Tensor& query, const Tensor& ref, std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < query.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < ref.rows(); ++j) all.emplace_back(sq_dist(query, i, ref, j), j);
    std::sort(all.begin(), all.end());
    for (std::size_t j = 0; j < k; ++j) out.push_back(all[j].second);
  }
  return out;
}

inline std::vector<double> row(const Tensor& t, std::size_t r) {
  std::vector<double> v(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) v[c] = t.at(r, c);
  return v;
}

/// max over the k nearest q_j of mlp([f_i, g_j, q_j - p_i]).
inline Tensor cost_volume(const Tensor& p, const Tensor& f, const Tensor& q, const Tensor& g, std::size_t k,
                          const ssmflow::pc::CostVolumeParams& params) {
  const auto nbrs = knn(p, q, k);
  const std::size_t out_c = params.mlp.out_features();
  std::vector<double> out(p.rows() * out_c, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      const std::size_t j = nbrs[i * k + a];
      std::vector<double> in = row(f, i);
      const auto gj = row(g, j);
      in.insert(in.end(), gj.begin(), gj.end());
      for (std::size_t c = 0; c < 3; ++c) in.push_back(q.at(j, c) - p.at(i, c));
      const auto y = mlp(in, params.mlp);
      for (std::size_t c = 0; c < out_c; ++c) out[i * out_c + c] = std::max(out[i * out_c + c], y[c]);
    }
  }
  return Tensor::from({p.rows(), out_c}, std::move(out));
}

/// Per-neighbour loop over [feat, offset]; weighted mean or elementwise max.
inline std::vector<double> set_aggregate(const std::vector<double>& center, const Tensor& nbr_coords,
                                         const Tensor& nbr_feats, const ssmflow::pc::SetConvParams& params,
                                         ssmflow::pc::Reduce mode) {
  const std::size_t k = nbr_coords.rows();
  const std::size_t out_c = params.mlp.out_features();
  const bool max_pool = mode == ssmflow::pc::Reduce::kMaxPool;
  std::vector<double> out(out_c, max_pool ? -std::numeric_limits<double>::infinity() : 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> offset(3);
    for (std::size_t c = 0; c < 3; ++c) offset[c] = nbr_coords.at(j, c) - center[c];
    std::vector<double> in = nbr_feats.defined() ? row(nbr_feats, j) : std::vector<double>{};
    in.insert(in.end(), offset.begin(), offset.end());
    const auto y = mlp(in, params.mlp);
    if (max_pool) {
      for (std::size_t c = 0; c < out_c; ++c) out[c] = std::max(out[c], y[c]);
    } else {
      const double w = linear(offset, params.weight)[0] / static_cast<double>(k);
      for (std::size_t c = 0; c < out_c; ++c) out[c] += w * y[c];
    }
  }
  return out;
}

inline ssmflow::pc::MetricsReport metrics(const Tensor& pred, const Tensor& gt) {
  ssmflow::pc::MetricsReport r;
  const std::size_t n = pred.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double e2 = 0.0, g2 = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      e2 += (pred.at(i, c) - gt.at(i, c)) * (pred.at(i, c) - gt.at(i, c));
      g2 += gt.at(i, c) * gt.at(i, c);
    }
    const double err = std::sqrt(e2);
    const double rel = err / (std::sqrt(g2) + 1e-4);
    r.epe3d += err / static_cast<double>(n);
    if (err < 0.05 || rel < 0.05) r.acc3ds += 1.0 / static_cast<double>(n);
    if (err < 0.1 || rel < 0.1) r.acc3dr += 1.0 / static_cast<double>(n);
    if (err > 0.3 || rel > 0.1) r.outliers += 1.0 / static_cast<double>(n);
  }
  return r;
}

/// exp(z) and (exp(z) - 1) / z from 64 Taylor terms in extended precision.
inline std::pair<double, double> zoh_series(double a, double b, double delta) {
  const long double z = static_cast<long double>(delta) * a;
  long double term = 1.0L, e = 0.0L, phi = 0.0L;
  for (int n = 0; n < 64; ++n) {
    e += term;                                  // z^n / n!
    phi += term / static_cast<long double>(n + 1);  // z^n / (n+1)!
    term *= z / static_cast<long double>(n + 1);
  }
  return {static_cast<double>(e), static_cast<double>(phi * delta * b)};
}

}  // namespace oracle
