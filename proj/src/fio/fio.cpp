// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "fio/fio.hpp"

#include <algorithm>
#include <numeric>

namespace ssmflow::fio {

Permutation Permutation::identity(std::size_t n) {
  Permutation p;
  p.forward.resize(n);
  std::iota(p.forward.begin(), p.forward.end(), std::size_t{0});
  p.inverse = p.forward;
  return p;
}

ScoreParams ScoreParams::make(ParamStore& store, const std::string& name, std::size_t context,
                              std::size_t motion, std::size_t hidden, Rng& rng) {
  const std::size_t in = context + motion + hidden;
  return {Mlp::make(store, name, {in, hidden, 1}, rng, Activation::kSilu, Activation::kTanh)};
}

OrderingScores score_points(const Tensor& cf, const Tensor& mf, const Tensor& h, const ScoreParams& params) {
  if (cf.rows() != mf.rows() || cf.rows() != h.rows()) {
    throw DimensionError("score_points: point counts differ (" + std::to_string(cf.rows()) + ", " +
                         std::to_string(mf.rows()) + ", " + std::to_string(h.rows()) + ")");
  }
  // Scores only pick the order; no gradient flows through a sort.
  NoGradScope no_grad;
  Tensor s = params.mlp(concat_cols({cf, mf, h}));
  OrderingScores out{std::vector<double>(s.data().begin(), s.data().end())};
  // tanh saturates to exactly +-1 in double precision; keep the open range.
  constexpr double kBound = 1.0 - 1e-15;
  for (auto& v : out.values) v = std::clamp(v, -kBound, kBound);
  return out;
}

Permutation sort_permutation(const OrderingScores& scores) {
  Permutation p = Permutation::identity(scores.values.size());
  std::stable_sort(p.forward.begin(), p.forward.end(),
                   [&](std::size_t a, std::size_t b) { return scores.values[a] < scores.values[b]; });
  for (std::size_t i = 0; i < p.forward.size(); ++i) p.inverse[p.forward[i]] = i;
  return p;
}

Ordered order_and_restore(const Tensor& seq, const OrderingScores& scores) {
  if (seq.rows() != scores.values.size()) {
    throw DimensionError("order_and_restore: " + std::to_string(scores.values.size()) + " scores for " +
                         std::to_string(seq.rows()) + " rows");
  }
  Permutation p = sort_permutation(scores);
  return {apply(seq, p), std::move(p)};
}

Tensor apply(const Tensor& seq, const Permutation& perm) { return gather_rows(seq, perm.forward); }

Tensor restore(const Tensor& seq, const Permutation& perm) { return gather_rows(seq, perm.inverse); }

}  // namespace ssmflow::fio
