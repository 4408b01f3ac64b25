// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tensor/tensor.hpp"

namespace ssmflow {

/// Seeded generator. Uniform draws are built from raw 53-bit words so the
/// stream is identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Named, ordered collection of trainable tensors. Insertion order is the
/// checkpoint order.
class ParamStore {
 public:
  Tensor create(const std::string& name, Shape shape, std::vector<double> values);
  Tensor uniform(const std::string& name, Shape shape, double bound, Rng& rng);
  Tensor constant(const std::string& name, Shape shape, double value);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  const Tensor* find(const std::string& name) const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// y = x W + b with W stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;  // may be undefined

  static Linear make(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                     Rng& rng, bool with_bias = true);
  static Linear make_zero(ParamStore& store, const std::string& name, std::size_t in,
                          std::size_t out, bool with_bias = true);
  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }
  Tensor operator()(const Tensor& x) const;
};

/// Linear layers with `hidden` applied between them and `last` after the
/// final one.
struct Mlp {
  std::vector<Linear> layers;
  Activation hidden = Activation::kSilu;
  Activation last = Activation::kIdentity;

  static Mlp make(ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths,
                  Rng& rng, Activation hidden = Activation::kSilu,
                  Activation last = Activation::kIdentity);
  std::size_t out_features() const { return layers.back().out_features(); }
  Tensor operator()(const Tensor& x) const;
};

}  // namespace ssmflow
