// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "tensor/nn.hpp"

#include <cmath>
#include <numbers>

namespace ssmflow {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Tensor ParamStore::create(const std::string& name, Shape shape, std::vector<double> values) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
  Tensor t = Tensor::from(std::move(shape), std::move(values), true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return create(name, std::move(shape), std::move(values));
}

Tensor ParamStore::constant(const std::string& name, Shape shape, double value) {
  std::vector<double> values(shape_numel(shape), value);
  return create(name, std::move(shape), std::move(values));
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

Linear Linear::make(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                    Rng& rng, bool with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = store.uniform(name + ".weight", {in, out}, bound, rng);
  if (with_bias) l.bias = store.uniform(name + ".bias", {out}, bound, rng);
  return l;
}

Linear Linear::make_zero(ParamStore& store, const std::string& name, std::size_t in,
                         std::size_t out, bool with_bias) {
  Linear l;
  l.weight = store.constant(name + ".weight", {in, out}, 0.0);
  if (with_bias) l.bias = store.constant(name + ".bias", {out}, 0.0);
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_row(y, bias) : y;
}

Mlp Mlp::make(ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths,
              Rng& rng, Activation hidden, Activation last) {
  if (widths.size() < 2) throw ConfigError("mlp '" + name + "' needs at least two widths");
  Mlp m;
  m.hidden = hidden;
  m.last = last;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(Linear::make(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    h = activation(h, i + 1 < layers.size() ? hidden : last);
  }
  return h;
}

}  // namespace ssmflow
