// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "ssm/ssm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace ssmflow::ssm {

namespace {

/// (exp(z) - 1) / z
double phi(double z) {
  if (std::abs(z) < kZohSeriesThreshold) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

/// d phi / dz
double phi_prime(double z) {
  if (std::abs(z) < 1e-2) return 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0;
  return (z * std::exp(z) - std::expm1(z)) / (z * z);
}

void sequential_recurrence(const double* a, const double* b, double* h, std::size_t length,
                           std::size_t lanes, const double* h0) {
  for (std::size_t m = 0; m < lanes; ++m) h[m] = a[m] * (h0 ? h0[m] : 0.0) + b[m];
  for (std::size_t t = 1; t < length; ++t) {
    const double* at = a + t * lanes;
    const double* bt = b + t * lanes;
    const double* prev = h + (t - 1) * lanes;
    double* cur = h + t * lanes;
    for (std::size_t m = 0; m < lanes; ++m) cur[m] = at[m] * prev[m] + bt[m];
  }
}

// Blocked scan: local recurrences per block, an exclusive Blelloch scan over
// the block summaries under (a1, b1) o (a2, b2) = (a2 a1, a2 b1 + b2), then a
// carry fix-up inside every block.
void parallel_recurrence(const double* a, const double* b, double* h, std::size_t length,
                         std::size_t lanes, const double* h0) {
  const std::size_t blocks = (length + kScanBlock - 1) / kScanBlock;
  const std::size_t padded = std::bit_ceil(blocks);
  std::vector<double> sum_a(padded * lanes, 1.0);
  std::vector<double> sum_b(padded * lanes, 0.0);

  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t begin = blk * kScanBlock;
    const std::size_t end = std::min(length, begin + kScanBlock);
    double* pa = sum_a.data() + blk * lanes;
    double* pb = sum_b.data() + blk * lanes;
    for (std::size_t m = 0; m < lanes; ++m) {
      h[begin * lanes + m] = b[begin * lanes + m];
      pa[m] = a[begin * lanes + m];
    }
    for (std::size_t t = begin + 1; t < end; ++t) {
      for (std::size_t m = 0; m < lanes; ++m) {
        h[t * lanes + m] = a[t * lanes + m] * h[(t - 1) * lanes + m] + b[t * lanes + m];
        pa[m] *= a[t * lanes + m];
      }
    }
    for (std::size_t m = 0; m < lanes; ++m) pb[m] = h[(end - 1) * lanes + m];
  }

  // Up-sweep.
  for (std::size_t d = 1; d < padded; d *= 2) {
    for (std::size_t i = 2 * d - 1; i < padded; i += 2 * d) {
      double* ra = sum_a.data() + i * lanes;
      double* rb = sum_b.data() + i * lanes;
      const double* la = sum_a.data() + (i - d) * lanes;
      const double* lb = sum_b.data() + (i - d) * lanes;
      for (std::size_t m = 0; m < lanes; ++m) {
        rb[m] = ra[m] * lb[m] + rb[m];
        ra[m] = ra[m] * la[m];
      }
    }
  }
  // Down-sweep to exclusive prefixes.
  std::fill_n(sum_a.data() + (padded - 1) * lanes, lanes, 1.0);
  std::fill_n(sum_b.data() + (padded - 1) * lanes, lanes, 0.0);
  std::vector<double> ta(lanes), tb(lanes);
  for (std::size_t d = padded / 2; d >= 1; d /= 2) {
    for (std::size_t i = 2 * d - 1; i < padded; i += 2 * d) {
      double* ra = sum_a.data() + i * lanes;
      double* rb = sum_b.data() + i * lanes;
      double* la = sum_a.data() + (i - d) * lanes;
      double* lb = sum_b.data() + (i - d) * lanes;
      std::copy_n(la, lanes, ta.data());
      std::copy_n(lb, lanes, tb.data());
      std::copy_n(ra, lanes, la);
      std::copy_n(rb, lanes, lb);
      // right = parent prefix followed by the left subtree
      for (std::size_t m = 0; m < lanes; ++m) {
        rb[m] = ta[m] * rb[m] + tb[m];
        ra[m] = ta[m] * ra[m];
      }
    }
    if (d == 1) break;
  }

  // Fix-up: h[t] += (prod of a within the block up to t) * carry.
  std::vector<double> carry(lanes), running(lanes);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t begin = blk * kScanBlock;
    const std::size_t end = std::min(length, begin + kScanBlock);
    const double* pa = sum_a.data() + blk * lanes;
    const double* pb = sum_b.data() + blk * lanes;
    for (std::size_t m = 0; m < lanes; ++m) {
      carry[m] = pb[m] + (h0 ? pa[m] * h0[m] : 0.0);
      running[m] = 1.0;
    }
    for (std::size_t t = begin; t < end; ++t) {
      for (std::size_t m = 0; m < lanes; ++m) {
        running[m] *= a[t * lanes + m];
        h[t * lanes + m] += running[m] * carry[m];
      }
    }
  }
}

/// Adjoint of the recurrence: lambda[t] = g[t] + a[t+1] lambda[t+1].
std::vector<double> adjoint_recurrence(const std::vector<double>& a, const std::vector<double>& g,
                                       std::size_t length, std::size_t lanes, ScanAlgo algo) {
  std::vector<double> ar(length * lanes, 0.0), br(length * lanes), hr(length * lanes);
  for (std::size_t tau = 0; tau < length; ++tau) {
    const std::size_t t = length - 1 - tau;
    std::copy_n(g.data() + t * lanes, lanes, br.data() + tau * lanes);
    if (tau > 0) std::copy_n(a.data() + (t + 1) * lanes, lanes, ar.data() + tau * lanes);
  }
  linear_recurrence(ar, br, hr, length, lanes, algo);
  std::vector<double> lambda(length * lanes);
  for (std::size_t tau = 0; tau < length; ++tau) {
    std::copy_n(hr.data() + tau * lanes, lanes, lambda.data() + (length - 1 - tau) * lanes);
  }
  return lambda;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void check_discrete(const DiscreteSSM& ssm, const Tensor& x, const Tensor& h0) {
  require(x.dim() == 2, "scan: input must be [L x D], got " + shape_str(x.shape()));
  const std::size_t d = x.cols();
  for (const Tensor* t : {&ssm.abar, &ssm.bbar, &ssm.c}) {
    require(t->dim() == 2 && t->rows() == d,
            "scan: parameter " + shape_str(t->shape()) + " does not match input " + shape_str(x.shape()));
  }
  const std::size_t s = ssm.abar.cols();
  require(ssm.bbar.cols() == s && ssm.c.cols() == s, "scan: state sizes differ");
  if (h0.defined()) require(h0.numel() == d * s, "scan: initial state must be [D x S]");
}

}  // namespace

ZohCoefficients discretize_zoh(double a, double b, double delta) {
  if (!(delta > 0.0)) throw DomainError("discretize_zoh: timescale must be positive, got " + std::to_string(delta));
  const double z = delta * a;
  return {std::exp(z), phi(z) * delta * b};
}

DiscreteSSM discretize(const ContinuousSSM& ssm, std::span<const double> delta) {
  const std::size_t d = ssm.a.rows(), s = ssm.a.cols();
  require(delta.size() == d, "discretize: need one timescale per channel");
  require(ssm.b.shape() == ssm.a.shape() && ssm.c.shape() == ssm.a.shape(), "discretize: A, B, C shapes differ");
  std::vector<double> abar(d * s), bbar(d * s);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      auto zc = discretize_zoh(ssm.a.at(i, j), ssm.b.at(i, j), delta[i]);
      abar[i * s + j] = zc.abar;
      bbar[i * s + j] = zc.bbar;
    }
  }
  return {Tensor::from({d, s}, std::move(abar)), Tensor::from({d, s}, std::move(bbar)), ssm.c.detach()};
}

void linear_recurrence(std::span<const double> a, std::span<const double> b, std::span<double> h,
                       std::size_t length, std::size_t lanes, ScanAlgo algo, std::span<const double> h0) {
  const std::size_t n = length * lanes;
  if (a.size() != n || b.size() != n || h.size() != n || (!h0.empty() && h0.size() != lanes)) {
    throw DimensionError("linear_recurrence: buffer sizes do not match " + std::to_string(length) + "x" +
                         std::to_string(lanes));
  }
  if (length == 0) return;
  const double* init = h0.empty() ? nullptr : h0.data();
  if (algo == ScanAlgo::kSequential) {
    sequential_recurrence(a.data(), b.data(), h.data(), length, lanes, init);
  } else {
    parallel_recurrence(a.data(), b.data(), h.data(), length, lanes, init);
  }
}

// ---------------------------------------------------------------------------
// Time-invariant scan.

Tensor scan(const DiscreteSSM& ssm, const Tensor& x, ScanAlgo algo, const Tensor& h0) {
  check_discrete(ssm, x, h0);
  const std::size_t len = x.rows(), d = x.cols(), s = ssm.abar.cols(), lanes = d * s;
  auto xd = x.data(), ab = ssm.abar.data(), bb = ssm.bbar.data(), cd = ssm.c.data();
  std::vector<double> a(len * lanes), bx(len * lanes), h(len * lanes);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < s; ++j) {
        a[t * lanes + i * s + j] = ab[i * s + j];
        bx[t * lanes + i * s + j] = bb[i * s + j] * xd[t * d + i];
      }
    }
  }
  std::vector<double> init;
  if (h0.defined()) init.assign(h0.data().begin(), h0.data().end());
  linear_recurrence(a, bx, h, len, lanes, algo, init);
  std::vector<double> y(len * d, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < s; ++j) acc += cd[i * s + j] * h[t * lanes + i * s + j];
      y[t * d + i] = acc;
    }
  }
  Tensor out = make_result({len, d}, std::move(y));
  std::vector<Tensor> inputs{x, ssm.abar, ssm.bbar, ssm.c};
  if (h0.defined()) inputs.push_back(h0);
  return record_op(
      inputs, out,
      [len, d, s, lanes, algo, a = std::move(a), h = std::move(h), init = std::move(init)](
          std::span<detail::Node* const> in, const detail::Node& o) {
        const auto& gy = o.grad;
        const auto& xv = in[0]->data;
        const auto& bbv = in[2]->data;
        const auto& cv = in[3]->data;
        std::vector<double> gh(len * lanes);
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < s; ++j) gh[t * lanes + i * s + j] = cv[i * s + j] * gy[t * d + i];
          }
        }
        auto lambda = adjoint_recurrence(a, gh, len, lanes, algo);
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
              const std::size_t k = t * lanes + i * s + j;
              const double prev = t > 0 ? h[k - lanes] : (init.empty() ? 0.0 : init[i * s + j]);
              if (in[0]->requires_grad) in[0]->grad[t * d + i] += lambda[k] * bbv[i * s + j];
              if (in[1]->requires_grad) in[1]->grad[i * s + j] += lambda[k] * prev;
              if (in[2]->requires_grad) in[2]->grad[i * s + j] += lambda[k] * xv[t * d + i];
              if (in[3]->requires_grad) in[3]->grad[i * s + j] += gy[t * d + i] * h[k];
            }
          }
        }
        if (in.size() > 4 && in[4]->requires_grad) {
          for (std::size_t m = 0; m < lanes; ++m) in[4]->grad[m] += a[m] * lambda[m];
        }
      });
}

Tensor scan_sequential(const DiscreteSSM& ssm, const Tensor& x, const Tensor& h0) {
  return scan(ssm, x, ScanAlgo::kSequential, h0);
}

Tensor scan_parallel(const DiscreteSSM& ssm, const Tensor& x, const Tensor& h0) {
  return scan(ssm, x, ScanAlgo::kParallel, h0);
}

std::vector<double> hidden_states(const DiscreteSSM& ssm, const Tensor& x) {
  check_discrete(ssm, x, {});
  const std::size_t len = x.rows(), d = x.cols(), s = ssm.abar.cols(), lanes = d * s;
  std::vector<double> a(len * lanes), bx(len * lanes), h(len * lanes);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t m = 0; m < lanes; ++m) {
      a[t * lanes + m] = ssm.abar.data()[m];
      bx[t * lanes + m] = ssm.bbar.data()[m] * x.data()[t * d + m / s];
    }
  }
  linear_recurrence(a, bx, h, len, lanes, ScanAlgo::kSequential);
  return h;
}

// ---------------------------------------------------------------------------
// Selective scan.

Tensor scan(const Tensor& a_cont, const SelectiveInputs& inputs, const Tensor& x, ScanAlgo algo) {
  require(x.dim() == 2, "selective scan: input must be [L x D], got " + shape_str(x.shape()));
  const std::size_t len = x.rows(), d = x.cols();
  require(a_cont.dim() == 2 && a_cont.rows() == d,
          "selective scan: A " + shape_str(a_cont.shape()) + " does not match input " + shape_str(x.shape()));
  const std::size_t s = a_cont.cols(), lanes = d * s;
  require(inputs.delta.shape() == x.shape(),
          "selective scan: delta " + shape_str(inputs.delta.shape()) + " does not match input " + shape_str(x.shape()));
  require(inputs.b.dim() == 2 && inputs.b.rows() == len && inputs.b.cols() == s,
          "selective scan: B " + shape_str(inputs.b.shape()) + " expected [" + std::to_string(len) + "x" +
              std::to_string(s) + "]");
  require(inputs.c.shape() == inputs.b.shape(),
          "selective scan: C " + shape_str(inputs.c.shape()) + " does not match B " + shape_str(inputs.b.shape()));

  auto xd = x.data(), dd = inputs.delta.data(), ad = a_cont.data(), bd = inputs.b.data(), cd = inputs.c.data();
  for (double v : dd) {
    if (!(v > 0.0)) throw DomainError("selective scan: timescales must be positive");
  }
  std::vector<double> abar(len * lanes), bbar(len * lanes), bx(len * lanes), h(len * lanes);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      const double dt = dd[t * d + i];
      for (std::size_t j = 0; j < s; ++j) {
        const std::size_t k = t * lanes + i * s + j;
        const double z = dt * ad[i * s + j];
        abar[k] = std::exp(z);
        bbar[k] = dt * phi(z) * bd[t * s + j];
        bx[k] = bbar[k] * xd[t * d + i];
      }
    }
  }
  linear_recurrence(abar, bx, h, len, lanes, algo);
  std::vector<double> y(len * d, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < s; ++j) acc += cd[t * s + j] * h[t * lanes + i * s + j];
      y[t * d + i] = acc;
    }
  }
  Tensor out = make_result({len, d}, std::move(y));
  return record_op(
      {x, inputs.delta, a_cont, inputs.b, inputs.c}, out,
      [len, d, s, lanes, algo, abar = std::move(abar), bbar = std::move(bbar), h = std::move(h)](
          std::span<detail::Node* const> in, const detail::Node& o) {
        const auto& gy = o.grad;
        const auto& xv = in[0]->data;
        const auto& dv = in[1]->data;
        const auto& av = in[2]->data;
        const auto& bv = in[3]->data;
        const auto& cv = in[4]->data;
        std::vector<double> gh(len * lanes);
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < s; ++j) gh[t * lanes + i * s + j] = cv[t * s + j] * gy[t * d + i];
          }
        }
        auto lambda = adjoint_recurrence(abar, gh, len, lanes, algo);
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t i = 0; i < d; ++i) {
            const double dt = dv[t * d + i];
            const double xi = xv[t * d + i];
            double gdt = 0.0, gx = 0.0;
            for (std::size_t j = 0; j < s; ++j) {
              const std::size_t k = t * lanes + i * s + j;
              const double aij = av[i * s + j];
              const double z = dt * aij;
              const double prev = t > 0 ? h[k - lanes] : 0.0;
              const double g_abar = lambda[k] * prev;
              const double g_bbar = lambda[k] * xi;
              gx += lambda[k] * bbar[k];
              // abar = exp(dt a); bbar = dt phi(dt a) b
              gdt += g_abar * abar[k] * aij + g_bbar * bv[t * s + j] * abar[k];
              if (in[2]->requires_grad) {
                in[2]->grad[i * s + j] += g_abar * abar[k] * dt + g_bbar * bv[t * s + j] * dt * dt * phi_prime(z);
              }
              if (in[3]->requires_grad) in[3]->grad[t * s + j] += g_bbar * dt * phi(z);
              if (in[4]->requires_grad) in[4]->grad[t * s + j] += gy[t * d + i] * h[k];
            }
            if (in[0]->requires_grad) in[0]->grad[t * d + i] += gx;
            if (in[1]->requires_grad) in[1]->grad[t * d + i] += gdt;
          }
        }
      });
}

Tensor scan_sequential(const Tensor& a, const SelectiveInputs& inputs, const Tensor& x) {
  return scan(a, inputs, x, ScanAlgo::kSequential);
}

Tensor scan_parallel(const Tensor& a, const SelectiveInputs& inputs, const Tensor& x) {
  return scan(a, inputs, x, ScanAlgo::kParallel);
}

// ---------------------------------------------------------------------------

Tensor materialize_kernel(const DiscreteSSM& ssm, std::size_t length) {
  if (length == 0) throw DimensionError("materialize_kernel: length must be positive");
  const std::size_t d = ssm.abar.rows(), s = ssm.abar.cols();
  auto ab = ssm.abar.data(), bb = ssm.bbar.data(), cd = ssm.c.data();
  std::vector<double> k(length * d, 0.0);
  std::vector<double> power(d * s, 1.0);
  for (std::size_t l = 0; l < length; ++l) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < s; ++j) acc += cd[i * s + j] * power[i * s + j] * bb[i * s + j];
      k[l * d + i] = acc;
    }
    for (std::size_t m = 0; m < d * s; ++m) power[m] *= ab[m];
  }
  return Tensor::from({length, d}, std::move(k));
}

Tensor materialize_kernel(const SelectiveInputs&, std::size_t) {
  throw ContractError("materialize_kernel: no convolution kernel exists for time-varying selective parameters");
}

Tensor causal_convolve(const Tensor& kernel, const Tensor& x) {
  require(x.dim() == 2 && kernel.dim() == 2 && kernel.cols() == x.cols() && kernel.rows() >= x.rows(),
          "causal_convolve: kernel " + shape_str(kernel.shape()) + " incompatible with input " + shape_str(x.shape()));
  const std::size_t len = x.rows(), d = x.cols();
  auto kd = kernel.data(), xd = x.data();
  std::vector<double> y(len * d, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j <= t; ++j) {
      const double* kr = kd.data() + j * d;
      const double* xr = xd.data() + (t - j) * d;
      double* yr = y.data() + t * d;
      for (std::size_t i = 0; i < d; ++i) yr[i] += kr[i] * xr[i];
    }
  }
  return Tensor::from({len, d}, std::move(y));
}

// ---------------------------------------------------------------------------

SelectiveProjection SelectiveProjection::make(ParamStore& store, const std::string& name, std::size_t width,
                                              std::size_t state_size, Rng& rng) {
  SelectiveProjection p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  p.delta.weight = store.uniform(name + ".delta.weight", {width, width}, bound, rng);
  // Bias chosen so that softplus(bias) spans [1e-3, 1e-1] log-uniformly.
  std::vector<double> bias(width);
  for (auto& v : bias) {
    const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    v = dt + std::log(-std::expm1(-dt));
  }
  p.delta.bias = store.create(name + ".delta.bias", {width}, std::move(bias));
  p.b = Linear::make(store, name + ".b", width, state_size, rng, false);
  p.c = Linear::make(store, name + ".c", width, state_size, rng, false);
  return p;
}

SelectiveInputs selective_project(const Tensor& x, const SelectiveProjection& proj) {
  require(x.dim() == 2 && x.cols() == proj.delta.in_features() && x.cols() == proj.b.in_features() &&
              x.cols() == proj.c.in_features() && proj.delta.out_features() == x.cols(),
          "selective_project: input " + shape_str(x.shape()) + " does not match projection width " +
              std::to_string(proj.delta.in_features()));
  return {softplus(proj.delta(x)), proj.b(x), proj.c(x)};
}

SelectiveSSM SelectiveSSM::make(ParamStore& store, const std::string& name, std::size_t width,
                                std::size_t state_size, Rng& rng) {
  SelectiveSSM m;
  std::vector<double> a_log(width * state_size);
  for (std::size_t i = 0; i < width; ++i) {
    for (std::size_t j = 0; j < state_size; ++j) a_log[i * state_size + j] = std::log(static_cast<double>(j + 1));
  }
  m.a_log = store.create(name + ".a_log", {width, state_size}, std::move(a_log));
  m.proj = SelectiveProjection::make(store, name, width, state_size, rng);
  return m;
}

Tensor SelectiveSSM::continuous_a() const { return scale(exp(a_log), -1.0); }

Tensor selective_ssm(const SelectiveSSM& ssm, const Tensor& x, ScanAlgo algo) {
  return scan(ssm.continuous_a(), selective_project(x, ssm.proj), x, algo);
}

Tensor bidirectional_scan(const SelectiveSSM& fwd, const SelectiveSSM& bwd, const Tensor& x, ScanAlgo algo) {
  Tensor forward = selective_ssm(fwd, x, algo);
  Tensor backward = reverse_rows(selective_ssm(bwd, reverse_rows(x), algo));
  return add(forward, backward);
}

Tensor bidirectional_scan(const DiscreteSSM& fwd, const DiscreteSSM& bwd, const Tensor& x, ScanAlgo algo) {
  Tensor forward = scan(fwd, x, algo);
  Tensor backward = reverse_rows(scan(bwd, reverse_rows(x), algo));
  return add(forward, backward);
}

}  // namespace ssmflow::ssm
