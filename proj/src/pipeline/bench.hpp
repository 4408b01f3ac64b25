// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssmflow {

struct BenchRow {
  std::string kernel;  // sequential, parallel or kernel-conv
  std::size_t length = 0;
  std::size_t state_size = 0;
  double ns_per_element = 0.0;  // median wall time / (length * channels)
  double max_abs_diff = 0.0;    // against the sequential scan
};

/// Times the three time-invariant scan evaluations on one random stable SSM
/// with `channels` lanes. Medians over `repeats` runs.
std::vector<BenchRow> bench_scan(std::size_t length, std::size_t state_size, std::size_t channels,
                                 std::size_t repeats, std::uint64_t seed);

}  // namespace ssmflow
