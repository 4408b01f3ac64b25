// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensor/nn.hpp"
#include "tensor/tensor.hpp"

namespace ssmflow::ssm {

enum class ScanAlgo { kSequential, kParallel };

/// Block length of the parallel scan; each block runs the plain recurrence.
inline constexpr std::size_t kScanBlock = 64;

/// Below this |delta * A| the input map uses its Taylor series.
inline constexpr double kZohSeriesThreshold = 1e-4;

struct ZohCoefficients {
  double abar = 0.0;
  double bbar = 0.0;
};

/// Zero-order hold for one diagonal entry: abar = exp(dA),
/// bbar = (dA)^-1 (exp(dA) - 1) dB.
ZohCoefficients discretize_zoh(double a, double b, double delta);

/// Diagonal continuous system, every tensor [D x S] (D channels, S states).
struct ContinuousSSM {
  Tensor a;
  Tensor b;
  Tensor c;
};

/// Time-invariant discrete system, every tensor [D x S].
struct DiscreteSSM {
  Tensor abar;
  Tensor bbar;
  Tensor c;
};

/// Per-channel timescale `delta` has length D.
DiscreteSSM discretize(const ContinuousSSM& ssm, std::span<const double> delta);

/// Input-dependent parameters: delta [L x D] (positive), b and c [L x S].
struct SelectiveInputs {
  Tensor delta;
  Tensor b;
  Tensor c;
};

/// h[t] = a[t] * h[t-1] + b[t] over L steps of M independent lanes stored
/// row-major [L x M]. `h0` (length M) defaults to zero.
void linear_recurrence(std::span<const double> a, std::span<const double> b, std::span<double> h,
                       std::size_t length, std::size_t lanes, ScanAlgo algo,
                       std::span<const double> h0 = {});

/// y[t, d] = sum_s c[d, s] h[t, d, s] with h[t] = abar h[t-1] + bbar x[t].
/// Differentiable in x and every parameter tensor. `h0` is [D x S] or undefined.
Tensor scan(const DiscreteSSM& ssm, const Tensor& x, ScanAlgo algo, const Tensor& h0 = {});
Tensor scan_sequential(const DiscreteSSM& ssm, const Tensor& x, const Tensor& h0 = {});
Tensor scan_parallel(const DiscreteSSM& ssm, const Tensor& x, const Tensor& h0 = {});

/// Selective scan: per step, (abar, bbar) = zoh(a, b[t], delta[t]) and
/// y[t, d] = sum_s c[t, s] h[t, d, s]. `a` is the continuous [D x S] matrix.
Tensor scan(const Tensor& a, const SelectiveInputs& inputs, const Tensor& x, ScanAlgo algo);
Tensor scan_sequential(const Tensor& a, const SelectiveInputs& inputs, const Tensor& x);
Tensor scan_parallel(const Tensor& a, const SelectiveInputs& inputs, const Tensor& x);

/// Hidden states [L x D x S] of the time-invariant recurrence, for analysis.
std::vector<double> hidden_states(const DiscreteSSM& ssm, const Tensor& x);

/// K[l, d] = sum_s c abar^l bbar for l < length, shape [length x D].
Tensor materialize_kernel(const DiscreteSSM& ssm, std::size_t length);
/// Always throws: the convolution kernel is undefined for time-varying parameters.
Tensor materialize_kernel(const SelectiveInputs& inputs, std::size_t length);

/// y[t, d] = sum_{j <= t} K[j, d] x[t - j, d].
Tensor causal_convolve(const Tensor& kernel, const Tensor& x);

/// Projections producing the selective parameters from an [L x E] sequence.
struct SelectiveProjection {
  Linear delta;  // E -> E, with bias
  Linear b;      // E -> S
  Linear c;      // E -> S

  static SelectiveProjection make(ParamStore& store, const std::string& name, std::size_t width,
                                  std::size_t state_size, Rng& rng);
};

/// delta = softplus(linear_delta(x)), b = linear_b(x), c = linear_c(x).
SelectiveInputs selective_project(const Tensor& x, const SelectiveProjection& proj);

/// One direction of a selective SSM: continuous A = -exp(a_log).
struct SelectiveSSM {
  Tensor a_log;  // [E x S]
  SelectiveProjection proj;

  static SelectiveSSM make(ParamStore& store, const std::string& name, std::size_t width,
                           std::size_t state_size, Rng& rng);
  Tensor continuous_a() const;
};

Tensor selective_ssm(const SelectiveSSM& ssm, const Tensor& x, ScanAlgo algo = ScanAlgo::kSequential);

/// y = scan_fwd(x) + reverse(scan_bwd(reverse(x))).
Tensor bidirectional_scan(const SelectiveSSM& fwd, const SelectiveSSM& bwd, const Tensor& x,
                          ScanAlgo algo = ScanAlgo::kSequential);
Tensor bidirectional_scan(const DiscreteSSM& fwd, const DiscreteSSM& bwd, const Tensor& x,
                          ScanAlgo algo = ScanAlgo::kSequential);

}  // namespace ssmflow::ssm
