// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tensor/nn.hpp"

namespace ssmflow::fio {

/// One score per point in (-1, 1).
struct OrderingScores {
  std::vector<double> values;
};

/// `forward[i]` is the source row placed at sequence position i;
/// `inverse[forward[i]] == i`.
struct Permutation {
  std::vector<std::size_t> forward;
  std::vector<std::size_t> inverse;

  static Permutation identity(std::size_t n);
  std::size_t size() const { return forward.size(); }
};

/// Two-layer scoring MLP: [C + C2 + C] -> C (SiLU) -> 1, then tanh.
struct ScoreParams {
  Mlp mlp;

  static ScoreParams make(ParamStore& store, const std::string& name, std::size_t context,
                          std::size_t motion, std::size_t hidden, Rng& rng);
};

OrderingScores score_points(const Tensor& cf, const Tensor& mf, const Tensor& h, const ScoreParams& params);

/// Ascending stable sort by score (ties keep input order).
Permutation sort_permutation(const OrderingScores& scores);

/// Rows of `seq` reordered by the ascending-score permutation.
struct Ordered {
  Tensor sequence;
  Permutation permutation;
};
Ordered order_and_restore(const Tensor& seq, const OrderingScores& scores);

Tensor apply(const Tensor& seq, const Permutation& perm);
Tensor restore(const Tensor& seq, const Permutation& perm);

}  // namespace ssmflow::fio
