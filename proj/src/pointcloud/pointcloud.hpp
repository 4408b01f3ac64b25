// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tensor/nn.hpp"

namespace ssmflow::pc {

/// Coordinates [N x 3], features [N x C] (undefined when C = 0) and the rows
/// of the next-finer level these points were drawn from.
struct PointCloudLevel {
  Tensor coords;
  Tensor feats;
  std::vector<std::size_t> parent_indices;
};

struct MetricsReport {
  double epe3d = 0.0;
  double acc3ds = 0.0;
  double acc3dr = 0.0;
  double outliers = 0.0;
};

/// Greedy max-min subsampling seeded at the lexicographically smallest point.
/// Ties on distance go to the lower index.
std::vector<std::size_t> farthest_point_sample(const Tensor& coords, std::size_t count);

/// Row-major [M x k] neighbour indices, nearest first, ties by index.
std::vector<std::size_t> knn(const Tensor& query, const Tensor& ref, std::size_t k);

enum class Reduce { kWeightedSum, kMaxPool };

/// Per-neighbour MLP over [feat, neighbour - centre]. The weighted-sum mode
/// scales each neighbour by weight(offset) and averages over the group.
struct SetConvParams {
  Mlp mlp;
  Linear weight;  // 3 -> 1, used by kWeightedSum only

  static SetConvParams make(ParamStore& store, const std::string& name, std::size_t in_feats,
                            const std::vector<std::size_t>& hidden, Rng& rng);
  std::size_t out_features() const { return mlp.out_features(); }
};

/// Single-centre form: nbr_coords [k x 3], nbr_feats [k x C] or undefined.
Tensor set_aggregate(const Tensor& center, const Tensor& nbr_coords, const Tensor& nbr_feats,
                     const SetConvParams& params, Reduce mode);

/// Batched form over `centers` [M x 3] with neighbour rows `index` (M*k) into
/// `coords`/`feats`. Differentiable in centers, coords and feats.
Tensor set_aggregate(const Tensor& centers, const Tensor& coords, const Tensor& feats,
                     std::span<const std::size_t> index, std::size_t k, const SetConvParams& params,
                     Reduce mode);

/// Local cost volume: per source point, max over its k nearest target points
/// of mlp([f_i, g_j, q_j - p_i]).
struct CostVolumeParams {
  Mlp mlp;
  static CostVolumeParams make(ParamStore& store, const std::string& name, std::size_t feat,
                               std::size_t out, Rng& rng);
};

Tensor cost_volume(const Tensor& p, const Tensor& f, const Tensor& q, const Tensor& g, std::size_t k,
                   const CostVolumeParams& params);

Tensor warp(const Tensor& p, const Tensor& flow);

/// Inverse-distance interpolation from the k nearest sparse points,
/// w_i proportional to 1 / (d_i + 1e-8).
Tensor upsample(const Tensor& sparse_coords, const Tensor& dense_coords, const Tensor& values,
                std::size_t k = 3);

/// Normalized interpolation weights [N x k] and neighbour indices used by upsample.
struct UpsampleWeights {
  std::vector<std::size_t> index;
  std::vector<double> weights;
};
UpsampleWeights upsample_weights(const Tensor& sparse_coords, const Tensor& dense_coords, std::size_t k);

/// Scene-flow metrics: acc3ds (err < 0.05 or rel < 5%), acc3dr (err < 0.1 or
/// rel < 10%), outliers (err > 0.3 or rel > 10%).
MetricsReport evaluate(const Tensor& pred, const Tensor& gt);

}  // namespace ssmflow::pc
