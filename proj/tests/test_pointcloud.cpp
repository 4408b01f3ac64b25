// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "pointcloud/pointcloud.hpp"
#include "tensor/errors.hpp"
#include "tensor/grad_check.hpp"

using namespace ssmflow;

TEST_SUITE("pointcloud") {

TEST_CASE("fps on a line picks both ends") {
  std::vector<double> v;
  for (int i = 9; i >= 0; --i) v.insert(v.end(), {static_cast<double>(i), 0.0, 0.0});
  Tensor line = Tensor::from({10, 3}, v);
  CHECK(pc::farthest_point_sample(line, 2) == std::vector<std::size_t>{9, 0});
}

TEST_CASE("fps with all points starts at the lexicographic minimum") {
  Rng rng(1);
  Tensor pts = oracle::random_tensor({12, 3}, rng);
  auto idx = pc::farthest_point_sample(pts, 12);
  auto sorted = idx;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> all(12);
  std::iota(all.begin(), all.end(), std::size_t{0});
  CHECK(sorted == all);
  CHECK(idx.front() == oracle::fps(pts, 1).front());
  CHECK_THROWS_AS(pc::farthest_point_sample(pts, 13), DomainError);
}

TEST_CASE("fps matches greedy oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 16 + rng.index(241);
    Tensor pts = oracle::random_tensor({n, 3}, rng);
    const std::size_t m = 1 + rng.index(n / 2);
    CHECK(pc::farthest_point_sample(pts, m) == oracle::fps(pts, m));
  }
}

TEST_CASE("knn self query and two references") {
  Rng rng(3);
  Tensor pts = oracle::random_tensor({15, 3}, rng);
  auto self = pc::knn(pts, pts, 1);
  for (std::size_t i = 0; i < 15; ++i) CHECK(self[i] == i);
  Tensor two = Tensor::from({2, 3}, {0, 0, 0, 1, 0, 0});
  CHECK(pc::knn(Tensor::from({1, 3}, {0.9, 0.1, 0}), two, 2) == std::vector<std::size_t>{1, 0});
  CHECK(pc::knn(Tensor::from({1, 3}, {0.2, 0.1, 0}), two, 2) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(pc::knn(pts, two, 3), DomainError);
}

TEST_CASE("knn matches full sort and is invariant to reference shuffling") {
  Rng rng(4);
  Tensor query = oracle::random_tensor({32, 3}, rng), ref = oracle::random_tensor({128, 3}, rng);
  auto got = pc::knn(query, ref, 8);
  CHECK(got == oracle::knn(query, ref, 8));
  std::vector<std::size_t> perm(128);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t j = 128; j > 1; --j) std::swap(perm[j - 1], perm[rng.index(j)]);
  auto shuffled = pc::knn(query, gather_rows(ref, perm), 8);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(perm[shuffled[i]] == got[i]);
}

TEST_CASE("set_aggregate single neighbour with identity layers") {
  Rng rng(5);
  ParamStore store;
  auto p = pc::SetConvParams::make(store, "sc", 2, {5}, rng);
  // Identity weights, zero bias, identity activation: output = [feat, offset].
  auto& layer = p.mlp.layers[0];
  for (double& v : layer.weight.mutable_data()) v = 0.0;
  for (double& v : layer.bias.mutable_data()) v = 0.0;
  for (std::size_t i = 0; i < 5; ++i) layer.weight.mutable_data()[i * 5 + i] = 1.0;
  p.mlp.last = Activation::kIdentity;
  for (double& v : p.weight.weight.mutable_data()) v = 0.0;
  p.weight.bias.mutable_data()[0] = 1.0;
  Tensor center = Tensor::from({1, 3}, {0.1, 0.2, 0.3});
  Tensor nbr = Tensor::from({1, 3}, {1.0, 2.0, 3.0});
  Tensor feat = Tensor::from({1, 2}, {-4.0, 5.0});
  Tensor out = pc::set_aggregate(center, nbr, feat, p, pc::Reduce::kWeightedSum);
  const std::vector<double> want{-4.0, 5.0, 0.9, 1.8, 2.7};
  for (std::size_t i = 0; i < 5; ++i) CHECK(out.at(i) == doctest::Approx(want[i]).epsilon(1e-15));
}

TEST_CASE("max-pool over duplicated neighbours equals the single neighbour") {
  Rng rng(6);
  ParamStore store;
  auto p = pc::SetConvParams::make(store, "sc", 3, {6, 4}, rng);
  Tensor center = oracle::random_tensor({1, 3}, rng);
  Tensor nbr = oracle::random_tensor({1, 3}, rng), feat = oracle::random_tensor({1, 3}, rng);
  Tensor nbr3 = gather_rows(nbr, std::vector<std::size_t>{0, 0, 0});
  Tensor feat3 = gather_rows(feat, std::vector<std::size_t>{0, 0, 0});
  CHECK(oracle::max_abs_diff(pc::set_aggregate(center, nbr3, feat3, p, pc::Reduce::kMaxPool),
                             pc::set_aggregate(center, nbr, feat, p, pc::Reduce::kMaxPool)) == 0.0);
}

TEST_CASE("set_aggregate matches per-neighbour loop") {
  Rng rng(7);
  ParamStore store;
  auto p = pc::SetConvParams::make(store, "sc", 4, {6, 5}, rng);
  auto coords_only = pc::SetConvParams::make(store, "c0", 0, {4}, rng);
  for (auto mode : {pc::Reduce::kWeightedSum, pc::Reduce::kMaxPool}) {
    Tensor center = oracle::random_tensor({1, 3}, rng);
    Tensor nbr = oracle::random_tensor({8, 3}, rng), feat = oracle::random_tensor({8, 4}, rng);
    Tensor out = pc::set_aggregate(center, nbr, feat, p, mode);
    auto want = oracle::set_aggregate(oracle::row(center, 0), nbr, feat, p, mode);
    for (std::size_t c = 0; c < want.size(); ++c) CHECK(std::abs(out.at(c) - want[c]) < 1e-12);
    // Coordinates only.
    Tensor out0 = pc::set_aggregate(center, nbr, Tensor{}, coords_only, mode);
    CHECK(out0.numel() == 4);
  }
}

TEST_CASE("cost volume: zero layers, self match, loop oracle") {
  Rng rng(8);
  ParamStore store;
  auto cv = pc::CostVolumeParams::make(store, "cv", 3, 4, rng);
  Tensor p = oracle::random_tensor({10, 3}, rng), f = oracle::random_tensor({10, 3}, rng);
  Tensor q = oracle::random_tensor({14, 3}, rng), g = oracle::random_tensor({14, 3}, rng);
  CHECK(oracle::max_abs_diff(pc::cost_volume(p, f, q, g, 5, cv), oracle::cost_volume(p, f, q, g, 5, cv)) < 1e-12);

  // k = 1 on identical clouds: the offset input is zero, so only features matter.
  ParamStore s2;
  auto cv2 = pc::CostVolumeParams::make(s2, "cv", 3, 4, rng);
  Tensor f10 = oracle::random_tensor({10, 3}, rng);
  Tensor same = pc::cost_volume(p, f, p, f10, 1, cv2);
  for (std::size_t i = 0; i < 10; ++i) {
    std::vector<double> in = oracle::row(f, i);
    const auto gi = oracle::row(f10, i);
    in.insert(in.end(), gi.begin(), gi.end());
    in.insert(in.end(), {0.0, 0.0, 0.0});
    const auto want = oracle::mlp(in, cv2.mlp);
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(same.at(i, c) - want[c]) < 1e-12);
  }

  for (const auto& [name, t] : s2.entries()) {
    Tensor w = t;
    for (double& v : w.mutable_data()) v = 0.0;
  }
  CHECK(oracle::max_abs(pc::cost_volume(p, f, q, g, 5, cv2)) == 0.0);
}

TEST_CASE("warp identities") {
  Rng rng(9);
  Tensor p = oracle::random_tensor({6, 3}, rng), a = oracle::random_tensor({6, 3}, rng);
  Tensor b = oracle::random_tensor({6, 3}, rng);
  CHECK(oracle::max_abs_diff(pc::warp(p, Tensor::zeros({6, 3})), p) == 0.0);
  Tensor t = gather_rows(Tensor::from({1, 3}, {0.5, -1.0, 2.0}), std::vector<std::size_t>(6, 0));
  Tensor moved = pc::warp(p, t);
  for (std::size_t i = 0; i < 6; ++i) CHECK(moved.at(i, 1) == p.at(i, 1) - 1.0);
  CHECK(oracle::max_abs_diff(pc::warp(pc::warp(p, a), b), pc::warp(p, add(a, b))) < 1e-15);
  CHECK_THROWS_AS(pc::warp(p, Tensor::zeros({5, 3})), DimensionError);
}

TEST_CASE("upsample: coincident point, constant field, equidistant mean") {
  Rng rng(10);
  Tensor sparse = oracle::random_tensor({6, 3}, rng), values = oracle::random_tensor({6, 2}, rng);
  Tensor dense = gather_rows(sparse, std::vector<std::size_t>{4});
  Tensor out = pc::upsample(sparse, dense, values, 3);
  for (std::size_t c = 0; c < 2; ++c) CHECK(out.at(0, c) == doctest::Approx(values.at(4, c)).epsilon(1e-6));

  Tensor dense2 = oracle::random_tensor({20, 3}, rng);
  Tensor constant = Tensor::full({6, 2}, 1.75);
  CHECK(oracle::max_abs_diff(pc::upsample(sparse, dense2, constant, 3), Tensor::full({20, 2}, 1.75)) < 1e-12);

  Tensor pair = Tensor::from({2, 3}, {-1, 0, 0, 1, 0, 0});
  Tensor mid = pc::upsample(pair, Tensor::from({1, 3}, {0, 0.5, 0}), Tensor::from({2, 1}, {2.0, 5.0}), 2);
  CHECK(mid.item() == doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("upsample weights are a partition of unity") {
  Rng rng(11);
  Tensor sparse = oracle::random_tensor({16, 3}, rng), dense = oracle::random_tensor({50, 3}, rng);
  auto w = pc::upsample_weights(sparse, dense, 3);
  for (std::size_t i = 0; i < 50; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(w.weights[i * 3 + j] >= 0.0);
      total += w.weights[i * 3 + j];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("metrics: exact, threshold arithmetic, loop oracle") {
  Rng rng(12);
  Tensor gt = oracle::random_tensor({9, 3}, rng);
  auto exact = pc::evaluate(gt, gt);
  CHECK(exact.epe3d == 0.0);
  CHECK(exact.acc3ds == 1.0);
  CHECK(exact.acc3dr == 1.0);
  CHECK(exact.outliers == 0.0);

  auto one = pc::evaluate(Tensor::from({1, 3}, {1.04, 0, 0}), Tensor::from({1, 3}, {1, 0, 0}));
  CHECK(one.epe3d == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(one.acc3ds == 1.0);
  CHECK(one.acc3dr == 1.0);
  CHECK(one.outliers == 0.0);

  for (int trial = 0; trial < 10; ++trial) {
    Tensor g = oracle::random_tensor({40, 3}, rng, -0.5, 0.5), p = oracle::random_tensor({40, 3}, rng, -0.5, 0.5);
    for (std::size_t i = 0; i < 40; i += 2)
      for (std::size_t c = 0; c < 3; ++c) p.mutable_data()[3 * i + c] = g.at(i, c) + rng.uniform(-0.06, 0.06);
    auto got = pc::evaluate(p, g);
    auto want = oracle::metrics(p, g);
    CHECK(std::abs(got.epe3d - want.epe3d) < 1e-10);
    CHECK(std::abs(got.acc3ds - want.acc3ds) < 1e-10);
    CHECK(std::abs(got.acc3dr - want.acc3dr) < 1e-10);
    CHECK(std::abs(got.outliers - want.outliers) < 1e-10);
    CHECK(got.acc3ds <= got.acc3dr);
  }
}

TEST_CASE("point op gradients") {
  Rng rng(13);
  ParamStore store;
  auto sc = pc::SetConvParams::make(store, "sc", 2, {4, 3}, rng);
  auto cv = pc::CostVolumeParams::make(store, "cv", 2, 3, rng);
  auto t = [&](Shape sh) { return oracle::random_tensor(sh, rng, -1, 1, true); };
  Tensor centers = t({4, 3}), coords = t({12, 3}), feats = t({12, 2});
  auto index = pc::knn(centers, coords, 4);
  Tensor w = oracle::random_tensor({4, 3}, rng);
  auto params = store.tensors();
  params.insert(params.end(), {centers, coords, feats});
  for (auto mode : {pc::Reduce::kWeightedSum, pc::Reduce::kMaxPool}) {
    auto r = grad_check([&] { return sum(mul(pc::set_aggregate(centers, coords, feats, index, 4, sc, mode), w)); },
                        params);
    CHECK(r.passed);
  }
  Tensor p = t({6, 3}), f = t({6, 2}), q = t({9, 3}), g = t({9, 2});
  Tensor w2 = oracle::random_tensor({6, 3}, rng);
  auto r = grad_check([&] { return sum(mul(pc::cost_volume(p, f, q, g, 4, cv), w2)); }, {p, f, q, g});
  CHECK(r.passed);
}

}  // TEST_SUITE
