// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pipeline/model.hpp"
#include "pipeline/scene.hpp"

namespace ssmflow {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Moment accumulators mirroring the parameter list, plus the step count.
struct TrainState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  static TrainState init(const ParamStore& params);
};

/// lr_min + (lr_max - lr_min)(1 + cos(pi t / T)) / 2, with t clamped to T.
double cosine_lr(std::size_t step, std::size_t total, double lr_max, double lr_min);

/// One decoupled-weight-decay Adam update from the gradients already stored
/// on `params`. Increments state.step.
void adamw_update(ParamStore& params, TrainState& state, double lr, const AdamWOptions& options);

struct StepReport {
  double loss = 0.0;
  double lr = 0.0;
};

/// Forward, loss, backward over every scene of the batch (gradients averaged
/// in batch order), then one AdamW update at the scheduled learning rate.
/// Throws TrainingError on a non-finite loss.
StepReport train_step(Model& model, TrainState& state, std::span<const SyntheticScene> batch);

/// Loss of one scene without recording gradients.
double scene_loss(const Model& model, const SyntheticScene& scene);

/// Metrics of the finest-level prediction after `iterations` per level.
pc::MetricsReport evaluate_scene(const Model& model, const SyntheticScene& scene, std::size_t iterations);

/// One forward pass with `iterations` per level; metrics of the finest-level
/// flow after each of its iterations.
std::vector<pc::MetricsReport> evaluate_iterations(const Model& model, const SyntheticScene& scene,
                                                   std::size_t iterations);

/// Checkpoint: `name=d0,d1` header lines, a blank line, then little-endian
/// float64 payloads in header order.
void save_checkpoint(const ParamStore& params, const std::string& path);
void load_checkpoint(ParamStore& params, const std::string& path);

}  // namespace ssmflow
