// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tensor/tensor.hpp"

namespace ssmflow {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  /// Elements checked per parameter; 0 checks all of them.
  std::size_t max_elements = 0;
};

/// Compares the tape gradient of the scalar `fn()` with central differences
/// for every element of `params`. `fn` must be deterministic and read the
/// parameters through the tensors passed here.
GradCheckReport grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> params,
                           const GradCheckOptions& options = {},
                           const std::vector<std::string>& names = {});

}  // namespace ssmflow
