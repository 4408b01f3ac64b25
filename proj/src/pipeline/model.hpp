// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "isu/isu.hpp"
#include "pipeline/config.hpp"
#include "pointcloud/pointcloud.hpp"

namespace ssmflow {

/// Parameters of one pyramid level.
struct LevelParams {
  pc::SetConvParams feature_encoder;  // shared by both frames
  pc::SetConvParams context_encoder;  // source frame only
  isu::IsuParams isu;                 // shared across iterations
  // Cross-frame enhancement, present on every level but the finest.
  std::optional<pc::SetConvParams> enhance_source;
  std::optional<pc::SetConvParams> enhance_target;
};

class Model {
 public:
  /// Validates `config` and initializes every parameter from config.seed.
  explicit Model(NetworkConfig config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const NetworkConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const std::vector<LevelParams>& levels() const { return levels_; }

 private:
  NetworkConfig config_;
  ParamStore store_;
  std::vector<LevelParams> levels_;
};

/// Sampled coordinates for one frame, finest level first.
struct PyramidGeometry {
  std::vector<Tensor> coords;
  std::vector<std::vector<std::size_t>> parent_index;  // into the next finer level (input cloud for level 0)
  std::vector<std::vector<std::size_t>> source_index;  // into the input cloud
  std::vector<std::vector<std::size_t>> group_index;   // into the next finer level (input cloud for level 0)
  std::vector<std::size_t> group_k;
};

/// Level 0 keeps the input order when the configured count equals the cloud
/// size; otherwise every level is an FPS subsample of the level below.
PyramidGeometry sample_pyramid(const Tensor& points, const std::vector<std::size_t>& counts, std::size_t k);

/// Encodes features level by level with weighted-sum set convolutions.
std::vector<Tensor> encode_pyramid(const PyramidGeometry& geometry, const Tensor& points,
                                   const std::vector<const pc::SetConvParams*>& encoders);

/// Geometry plus feature-encoder output for each level.
std::vector<pc::PointCloudLevel> build_pyramid(const Tensor& points, const Model& model);

struct ForwardResult {
  std::vector<std::vector<Tensor>> flows;              // [level][iteration], finest level first
  std::vector<std::vector<std::size_t>> source_index;  // per level, into the source cloud
  const Tensor& prediction() const { return flows.front().back(); }
};

/// Coarse-to-fine estimate of the flow of `source` towards `target`.
/// `iterations` overrides the configured per-level iteration count.
ForwardResult forward(const Model& model, const Tensor& source, const Tensor& target,
                      std::optional<std::size_t> iterations = std::nullopt);

/// sum_l alpha_l sum_n mean_i |gt_l,i - sf_l,n,i|; gt_l gathers `gt_flow` at
/// each level's source indices.
Tensor flow_loss(const ForwardResult& result, const Tensor& gt_flow, const std::vector<double>& weights);

}  // namespace ssmflow
