// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fio/fio.hpp"
#include "oracles.hpp"

using namespace ssmflow;

namespace {

struct Inputs {
  Tensor cf, mf, h;
};

Inputs random_inputs(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return {oracle::random_tensor({n, 4}, rng, lo, hi), oracle::random_tensor({n, 3}, rng, lo, hi),
          oracle::random_tensor({n, 4}, rng, lo, hi)};
}

std::vector<std::size_t> argsort(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

}  // namespace

TEST_SUITE("fio") {

TEST_CASE("zero weights give zero scores") {
  Rng rng(1);
  ParamStore store;
  auto p = fio::ScoreParams::make(store, "s", 4, 3, 4, rng);
  for (const auto& [name, t] : store.entries()) {
    Tensor w = t;
    for (double& v : w.mutable_data()) v = 0.0;
  }
  auto in = random_inputs(10, rng);
  for (double s : fio::score_points(in.cf, in.mf, in.h, p).values) CHECK(s == 0.0);
}

TEST_CASE("scores stay strictly inside the unit interval") {
  Rng rng(2);
  ParamStore store;
  auto p = fio::ScoreParams::make(store, "s", 4, 3, 4, rng);
  for (const auto& [name, t] : store.entries()) {
    Tensor w = t;
    for (double& v : w.mutable_data()) v *= 500.0;
  }
  auto in = random_inputs(50, rng);
  bool saturated = false;
  for (double s : fio::score_points(in.cf, in.mf, in.h, p).values) {
    CHECK(std::abs(s) <= 1.0 - 1e-15);
    if (std::abs(s) == 1.0 - 1e-15) saturated = true;
  }
  CHECK(saturated);
}

TEST_CASE("projection onto one channel orders by that channel") {
  Rng rng(3);
  ParamStore store;
  auto p = fio::ScoreParams::make(store, "s", 4, 3, 4, rng);
  for (const auto& [name, t] : store.entries()) {
    Tensor w = t;
    for (double& v : w.mutable_data()) v = 0.0;
  }
  // Hidden unit 0 copies mf channel 1; the output reads hidden unit 0.
  p.mlp.layers[0].weight.mutable_data()[(4 + 1) * 4 + 0] = 1.0;
  p.mlp.layers[1].weight.mutable_data()[0] = 1.0;
  auto in = random_inputs(20, rng, 0.0, 1.0);  // silu is monotone on [0, 1]
  auto scores = fio::score_points(in.cf, in.mf, in.h, p);
  std::vector<double> channel;
  for (std::size_t i = 0; i < 20; ++i) channel.push_back(in.mf.at(i, 1));
  CHECK(fio::sort_permutation(scores).forward == argsort(channel));
}

TEST_CASE("sorting ascending, descending and random scores") {
  fio::OrderingScores up{{-0.5, 0.1, 0.2, 0.9}};
  CHECK(fio::sort_permutation(up).forward == std::vector<std::size_t>{0, 1, 2, 3});
  fio::OrderingScores down{{0.9, 0.2, 0.1, -0.5}};
  CHECK(fio::sort_permutation(down).forward == std::vector<std::size_t>{3, 2, 1, 0});

  Rng rng(4);
  fio::OrderingScores random;
  for (int i = 0; i < 30; ++i) random.values.push_back(rng.uniform(-1, 1));
  Tensor payload = oracle::random_tensor({30, 5}, rng);
  auto ordered = fio::order_and_restore(payload, random);
  CHECK(oracle::max_abs_diff(fio::restore(ordered.sequence, ordered.permutation), payload) == 0.0);
  for (std::size_t i = 0; i < 30; ++i) CHECK(ordered.permutation.inverse[ordered.permutation.forward[i]] == i);
  for (std::size_t i = 1; i < 30; ++i) {
    CHECK(random.values[ordered.permutation.forward[i - 1]] <= random.values[ordered.permutation.forward[i]]);
  }
}

TEST_CASE("sorting preserves the multiset of rows") {
  Rng rng(5);
  fio::OrderingScores scores;
  for (int i = 0; i < 25; ++i) scores.values.push_back(rng.uniform(-1, 1));
  Tensor payload = oracle::random_tensor({25, 3}, rng);
  auto ordered = fio::order_and_restore(payload, scores);
  std::vector<std::vector<double>> a, b;
  for (std::size_t i = 0; i < 25; ++i) {
    a.push_back(oracle::row(payload, i));
    b.push_back(oracle::row(ordered.sequence, i));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("equal scores keep input order") {
  fio::OrderingScores scores{{0.3, -0.2, 0.3, -0.2, 0.3}};
  CHECK(fio::sort_permutation(scores).forward == std::vector<std::size_t>{1, 3, 0, 2, 4});
}

TEST_CASE("ordered sequence does not depend on input order") {
  Rng rng(6);
  ParamStore store;
  auto p = fio::ScoreParams::make(store, "s", 4, 3, 4, rng);
  auto in = random_inputs(40, rng);
  Tensor payload = oracle::random_tensor({40, 6}, rng);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t j = 40; j > 1; --j) std::swap(perm[j - 1], perm[rng.index(j)]);
  auto base = fio::order_and_restore(payload, fio::score_points(in.cf, in.mf, in.h, p));
  auto shuffled = fio::order_and_restore(
      gather_rows(payload, perm),
      fio::score_points(gather_rows(in.cf, perm), gather_rows(in.mf, perm), gather_rows(in.h, perm), p));
  CHECK(oracle::max_abs_diff(base.sequence, shuffled.sequence) == 0.0);
}

TEST_CASE("score count must match rows") {
  CHECK_THROWS_AS(fio::order_and_restore(Tensor::zeros({3, 2}), fio::OrderingScores{{0.1, 0.2}}), DimensionError);
}

}  // TEST_SUITE
