// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "isu/isu.hpp"
#include "oracles.hpp"
#include "tensor/errors.hpp"
#include "tensor/grad_check.hpp"

using namespace ssmflow;

namespace {

constexpr std::size_t kC = 6, kC2 = 5;

isu::IsuOptions small_options(isu::UpdateKind kind = isu::UpdateKind::kIsuFio) {
  isu::IsuOptions o;
  o.channels = kC;
  o.motion_channels = kC2;
  o.k = 4;
  o.state_size = 3;
  o.kind = kind;
  return o;
}

struct Features {
  Tensor cf, mf, h;
};

Features random_features(std::size_t n, Rng& rng) {
  return {oracle::random_tensor({n, kC}, rng), oracle::random_tensor({n, kC2}, rng),
          oracle::random_tensor({n, kC}, rng)};
}

void fill(const Tensor& t, double value) {
  Tensor w = t;
  for (double& v : w.mutable_data()) v = value;
}

isu::LevelInputs random_level(std::size_t n, Rng& rng) {
  return {oracle::random_tensor({n, 3}, rng),   oracle::random_tensor({n, 3}, rng),
          oracle::random_tensor({n, kC}, rng),  oracle::random_tensor({n, kC}, rng),
          oracle::random_tensor({n, kC}, rng),  oracle::random_tensor({n, 3}, rng, -0.1, 0.1),
          oracle::random_tensor({n, kC}, rng)};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_SUITE("isu") {

TEST_CASE("update registry") {
  std::vector<std::string> names;
  for (auto k : isu::all_update_kinds()) names.push_back(isu::to_string(k));
  CHECK(names == std::vector<std::string>{"conv-gru", "mamba-uni", "bimamba", "isu", "isu-fio"});
  for (const auto& n : names) CHECK(isu::to_string(isu::parse_update(n)) == n);
  CHECK(isu::parse_update("isu+fio") == isu::UpdateKind::kIsuFio);
  CHECK_THROWS_AS(isu::parse_update("lstm"), ConfigError);
}

TEST_CASE("fuse_inputs: zeros, shape, matmul-then-layernorm oracle") {
  Rng rng(1);
  ParamStore store;
  auto p = isu::IsuParams::make(store, "isu", small_options(), rng);
  fill(p.fusion.conv.bias, 0.0);
  Tensor z = isu::fuse_inputs(Tensor::zeros({4, kC}), Tensor::zeros({4, kC2}), Tensor::zeros({4, kC}), p.fusion);
  CHECK(oracle::max_abs(z) == 0.0);

  ParamStore s2;
  auto p2 = isu::IsuParams::make(s2, "isu", small_options(), rng);
  auto in = random_features(7, rng);
  Tensor u = isu::fuse_inputs(in.cf, in.mf, in.h, p2.fusion);
  CHECK(u.shape() == Shape{7, kC});
  for (std::size_t i = 0; i < 7; ++i) {
    auto x = oracle::row(in.cf, i);
    for (auto* t : {&in.mf, &in.h}) {
      auto r = oracle::row(*t, i);
      x.insert(x.end(), r.begin(), r.end());
    }
    auto y = oracle::linear(x, p2.fusion.conv);
    double mu = 0.0, var = 0.0;
    for (double v : y) mu += v / kC;
    for (double v : y) var += (v - mu) * (v - mu) / kC;
    for (std::size_t c = 0; c < kC; ++c) {
      const double want = p2.fusion.gamma.at(c) * (y[c] - mu) / std::sqrt(var + 1e-5) + p2.fusion.beta.at(c);
      CHECK(std::abs(u.at(i, c) - want) < 1e-12);
    }
  }
}

TEST_CASE("optimize_hidden: residual blocks, identity order, manual permutation") {
  Rng rng(2);
  auto o = small_options();
  o.zero_out_proj = true;
  ParamStore store;
  auto zero = isu::IsuParams::make(store, "z", o, rng);
  auto in = random_features(9, rng);
  fio::OrderingScores scores;
  for (int i = 0; i < 9; ++i) scores.values.push_back(rng.uniform(-1, 1));
  Tensor u = oracle::random_tensor({9, kC}, rng);
  CHECK(oracle::max_abs_diff(isu::optimize_hidden(u, in.h, zero.blocks, scores), in.h) == 0.0);

  ParamStore s2;
  auto p = isu::IsuParams::make(s2, "p", small_options(), rng);
  fio::OrderingScores ascending;
  for (int i = 0; i < 9; ++i) ascending.values.push_back(-0.9 + 0.2 * i);
  CHECK(oracle::max_abs_diff(isu::optimize_hidden(u, in.h, p.blocks, ascending), mamba::stack_blocks(u, p.blocks, in.h)) ==
        0.0);

  std::vector<std::size_t> order(9);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores.values[a] < scores.values[b]; });
  Tensor sorted_out = mamba::stack_blocks(gather_rows(u, order), p.blocks, gather_rows(in.h, order));
  std::vector<double> manual(9 * kC);
  for (std::size_t pos = 0; pos < 9; ++pos)
    for (std::size_t c = 0; c < kC; ++c) manual[order[pos] * kC + c] = sorted_out.at(pos, c);
  CHECK(oracle::max_abs_diff(isu::optimize_hidden(u, in.h, p.blocks, scores), Tensor::from({9, kC}, manual)) == 0.0);
}

TEST_CASE("adaptive_fuse gate limits and midpoint") {
  Rng rng(3);
  ParamStore store;
  auto p = isu::IsuParams::make(store, "isu", small_options(), rng);
  auto in = random_features(5, rng);
  Tensor h_opt = oracle::random_tensor({5, kC}, rng);
  fill(p.gate.conv.weight, 0.0);
  fill(p.gate.conv.bias, -30.0);
  CHECK(oracle::max_abs_diff(isu::adaptive_fuse(in.cf, in.mf, in.h, h_opt, p.gate), in.h) < 1e-12);
  fill(p.gate.conv.bias, 30.0);
  CHECK(oracle::max_abs_diff(isu::adaptive_fuse(in.cf, in.mf, in.h, h_opt, p.gate), h_opt) < 1e-12);
  fill(p.gate.conv.bias, 0.0);
  CHECK(oracle::max_abs_diff(isu::adaptive_fuse(in.cf, in.mf, in.h, h_opt, p.gate), scale(add(in.h, h_opt), 0.5)) <
        1e-15);
  fill(p.gate.conv.bias, -1000.0);
  CHECK(oracle::max_abs_diff(isu::adaptive_fuse(in.cf, in.mf, in.h, h_opt, p.gate), in.h) == 0.0);
}

TEST_CASE("adaptive_fuse is a convex combination") {
  Rng rng(4);
  ParamStore store;
  auto p = isu::IsuParams::make(store, "isu", small_options(), rng);
  for (int trial = 0; trial < 5; ++trial) {
    auto in = random_features(12, rng);
    Tensor h_opt = oracle::random_tensor({12, kC}, rng, -3, 3);
    Tensor out = isu::adaptive_fuse(in.cf, in.mf, in.h, h_opt, p.gate);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const double lo = std::min(in.h.data()[i], h_opt.data()[i]), hi = std::max(in.h.data()[i], h_opt.data()[i]);
      CHECK(out.data()[i] >= lo);
      CHECK(out.data()[i] <= hi);
    }
  }
}

TEST_CASE("decode_flow: zero head, shape, linear head") {
  Rng rng(5);
  ParamStore store;
  auto p = isu::IsuParams::make(store, "isu", small_options(), rng);
  Tensor h = oracle::random_tensor({8, kC}, rng);
  Tensor d = isu::decode_flow(h, p.head);
  CHECK(d.shape() == Shape{8, 3});
  CHECK(oracle::max_abs(d) == 0.0);

  auto o = small_options();
  o.zero_flow_head = false;
  ParamStore s2;
  auto lin = isu::IsuParams::make(s2, "isu", o, rng);
  lin.head.mlp.hidden = Activation::kIdentity;
  for (auto& layer : lin.head.mlp.layers) fill(layer.bias, 0.0);
  CHECK(oracle::max_abs_diff(isu::decode_flow(scale(h, 2.0), lin.head), scale(isu::decode_flow(h, lin.head), 2.0)) <
        1e-14);
}

TEST_CASE("gru_update gates and formula") {
  Rng rng(6);
  ParamStore store;
  auto p = isu::IsuParams::make(store, "isu", small_options(isu::UpdateKind::kConvGru), rng);
  auto in = random_features(6, rng);
  Tensor h_new = isu::gru_update(in.cf, in.mf, in.h, p.gru);
  for (std::size_t i = 0; i < 6; ++i) {
    auto x = oracle::row(in.cf, i);
    auto m = oracle::row(in.mf, i);
    auto h = oracle::row(in.h, i);
    std::vector<double> xh = x;
    xh.insert(xh.end(), m.begin(), m.end());
    xh.insert(xh.end(), h.begin(), h.end());
    auto z = oracle::linear(xh, p.gru.update), r = oracle::linear(xh, p.gru.reset);
    std::vector<double> xrh = x;
    xrh.insert(xrh.end(), m.begin(), m.end());
    for (std::size_t c = 0; c < kC; ++c) xrh.push_back(sigmoid(r[c]) * h[c]);
    auto q = oracle::linear(xrh, p.gru.candidate);
    for (std::size_t c = 0; c < kC; ++c) {
      const double want = (1.0 - sigmoid(z[c])) * h[c] + sigmoid(z[c]) * std::tanh(q[c]);
      CHECK(std::abs(h_new.at(i, c) - want) < 1e-12);
    }
  }
  fill(p.gru.update.weight, 0.0);
  fill(p.gru.update.bias, -30.0);
  CHECK(oracle::max_abs_diff(isu::gru_update(in.cf, in.mf, in.h, p.gru), in.h) < 1e-12);
  fill(p.gru.update.bias, 30.0);
  Tensor big = scale(in.h, 5.0);
  CHECK(oracle::max_abs(isu::gru_update(in.cf, in.mf, big, p.gru)) <= 1.0 + 1e-11);
}

TEST_CASE("isu_iterate: zero head keeps the flow, list length, manual threading") {
  for (auto kind : isu::all_update_kinds()) {
    CAPTURE(isu::to_string(kind));
    Rng rng(7);
    ParamStore store;
    auto p = isu::IsuParams::make(store, "isu", small_options(kind), rng);
    auto in = random_level(10, rng);
    auto one = isu::isu_iterate(in, p, 1);
    CHECK(oracle::max_abs_diff(one.sf, in.sf0) == 0.0);
    CHECK(isu::isu_iterate(in, p, 3).flows.size() == 3);

    auto o = small_options(kind);
    o.zero_flow_head = false;
    ParamStore s2;
    auto q = isu::IsuParams::make(s2, "isu", o, rng);
    auto two = isu::isu_iterate(in, q, 2);
    auto a = isu::isu_step(in, q);
    auto in2 = in;
    in2.sf0 = a.sf;
    in2.h0 = a.h;
    auto b = isu::isu_step(in2, q);
    CHECK(oracle::max_abs_diff(two.flows[0], a.sf) == 0.0);
    CHECK(oracle::max_abs_diff(two.flows[1], b.sf) == 0.0);
    CHECK(oracle::max_abs_diff(two.h, b.h) == 0.0);
    CHECK_THROWS_AS(isu::isu_iterate(in, q, 0), ConfigError);
  }
}

TEST_CASE("identity blocks restore order bit-exactly for any scores") {
  Rng rng(8);
  auto o = small_options();
  o.zero_out_proj = true;
  ParamStore store;
  auto p = isu::IsuParams::make(store, "isu", o, rng);
  for (int trial = 0; trial < 5; ++trial) {
    auto in = random_features(11, rng);
    auto scores = fio::score_points(in.cf, in.mf, in.h, p.score);
    Tensor u = isu::fuse_inputs(in.cf, in.mf, in.h, p.fusion);
    CHECK(oracle::max_abs_diff(isu::optimize_hidden(u, in.h, p.blocks, scores), in.h) == 0.0);
  }
}

TEST_CASE("full update gradient check, eight points, two iterations") {
  for (auto kind : isu::all_update_kinds()) {
    CAPTURE(isu::to_string(kind));
    Rng rng(9);
    auto o = small_options(kind);
    o.zero_flow_head = false;
    ParamStore store;
    auto p = isu::IsuParams::make(store, "isu", o, rng);
    auto in = random_level(8, rng);
    for (Tensor* t : {&in.f, &in.g, &in.cf, &in.h0}) t->set_requires_grad(true);
    Tensor w0 = oracle::random_tensor({8, 3}, rng), w1 = oracle::random_tensor({8, 3}, rng);
    auto params = store.tensors();
    params.insert(params.end(), {in.f, in.g, in.cf, in.h0});
    auto r = grad_check(
        [&] {
          auto res = isu::isu_iterate(in, p, 2);
          return add(sum(mul(res.flows[0], w0)), sum(mul(res.flows[1], w1)));
        },
        params);
    CHECK(r.passed);
  }
}

}  // TEST_SUITE
