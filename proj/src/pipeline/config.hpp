// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isu/isu.hpp"

namespace ssmflow {

/// Model and training settings. Every field has a `key = value` spelling;
/// see config_keys().
struct NetworkConfig {
  std::size_t levels = 2;
  std::size_t iterations = 2;
  std::vector<std::size_t> points{256, 64};  // finest first
  std::size_t channels = 32;
  std::size_t motion_channels = 32;
  std::size_t k = 16;
  isu::UpdateKind update = isu::UpdateKind::kIsuFio;
  std::size_t blocks = 2;
  std::size_t state_size = 8;
  std::size_t expand = 2;
  std::size_t conv_width = 3;
  std::uint64_t seed = 1;

  // Loss weights, finest level first.
  std::vector<double> loss_weights{0.16, 0.08, 0.04, 0.02};

  // Optimizer and schedule.
  double lr = 1e-3;
  double lr_min = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  std::size_t steps = 1000;
  std::size_t batch = 1;

  // Zero-initialize block output projections / final flow-head layers.
  bool zero_out_proj = false;
  bool zero_flow_head = true;

  void validate() const;
  isu::IsuOptions isu_options() const;
};

/// Sets one key from its textual value. Unknown keys and malformed values
/// throw ConfigError.
void apply_setting(NetworkConfig& config, const std::string& key, const std::string& value);
std::string get_setting(const NetworkConfig& config, const std::string& key);
const std::vector<std::string>& config_keys();

/// Parses `key = value` lines; `#` starts a comment.
NetworkConfig parse_config(const std::string& text, NetworkConfig base = {});
NetworkConfig load_config(const std::string& path, NetworkConfig base = {});
std::string format_config(const NetworkConfig& config);

}  // namespace ssmflow
