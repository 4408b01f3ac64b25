// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "pipeline/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "ssm/ssm.hpp"

namespace ssmflow {

namespace {

double median_seconds(std::size_t repeats, const std::function<Tensor()>& run, Tensor& last) {
  std::vector<double> times;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    last = run();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) worst = std::max(worst, std::abs(ad[i] - bd[i]));
  return worst;
}

}  // namespace

std::vector<BenchRow> bench_scan(std::size_t length, std::size_t state_size, std::size_t channels,
                                 std::size_t repeats, std::uint64_t seed) {
  if (repeats < 3) throw ConfigError("bench needs at least 3 repeats, got " + std::to_string(repeats));
  if (length == 0 || state_size == 0 || channels == 0) throw ConfigError("bench sizes must be positive");
  Rng rng(seed);
  const std::size_t n = channels * state_size;
  std::vector<double> a(n), b(n), c(n), x(length * channels);
  for (auto& v : a) v = -rng.uniform(0.5, 2.0);
  for (auto& v : b) v = rng.uniform(-1.0, 1.0);
  for (auto& v : c) v = rng.uniform(-1.0, 1.0);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  std::vector<double> delta(channels);
  for (auto& d : delta) d = rng.uniform(0.01, 0.1);
  ssm::ContinuousSSM cont{Tensor::from({channels, state_size}, a), Tensor::from({channels, state_size}, b),
                          Tensor::from({channels, state_size}, c)};
  const ssm::DiscreteSSM disc = ssm::discretize(cont, delta);
  const Tensor input = Tensor::from({length, channels}, x);

  NoGradScope no_grad;
  Tensor seq, par, conv;
  const double t_seq = median_seconds(repeats, [&] { return ssm::scan_sequential(disc, input); }, seq);
  const double t_par = median_seconds(repeats, [&] { return ssm::scan_parallel(disc, input); }, par);
  const double t_conv = median_seconds(
      repeats, [&] { return ssm::causal_convolve(ssm::materialize_kernel(disc, length), input); }, conv);

  const double elements = static_cast<double>(length * channels);
  return {
      {"sequential", length, state_size, 1e9 * t_seq / elements, 0.0},
      {"parallel", length, state_size, 1e9 * t_par / elements, max_abs_diff(par, seq)},
      {"kernel-conv", length, state_size, 1e9 * t_conv / elements, max_abs_diff(conv, seq)},
  };
}

}  // namespace ssmflow
