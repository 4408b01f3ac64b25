// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "pipeline/train.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ssmflow {

namespace {

std::string shape_record(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(shape[i]);
  }
  return out;
}

std::uint64_t to_little_endian(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return out;
}

}  // namespace

TrainState TrainState::init(const ParamStore& params) {
  TrainState s;
  for (const auto& [name, t] : params.entries()) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

double cosine_lr(std::size_t step, std::size_t total, double lr_max, double lr_min) {
  if (total == 0) return lr_max;
  const double t = static_cast<double>(std::min(step, total)) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void adamw_update(ParamStore& params, TrainState& state, double lr, const AdamWOptions& o) {
  const auto& entries = params.entries();
  if (state.m.size() != entries.size() || state.v.size() != entries.size()) {
    throw ContractError("adamw_update: optimizer state tracks " + std::to_string(state.m.size()) + " tensors, model has " +
                        std::to_string(entries.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor param = entries[p].second;
    auto data = param.mutable_data();
    auto grad = param.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    if (m.size() != data.size()) throw ContractError("adamw_update: moment shape differs for " + entries[p].first);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] -= lr * (m_hat / (std::sqrt(v_hat) + o.eps) + o.weight_decay * data[i]);
    }
  }
}

StepReport train_step(Model& model, TrainState& state, std::span<const SyntheticScene> batch) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const auto& cfg = model.config();
  auto& params = model.params();
  params.zero_grad();
  double total = 0.0;
  for (const auto& scene : batch) {
    Tape tape;
    TapeScope scope(tape);
    auto result = forward(model, scene.source, scene.target);
    Tensor loss = flow_loss(result, scene.flow, cfg.loss_weights);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw TrainingError("non-finite loss at step " + std::to_string(state.step) + " on scene seed " +
                          std::to_string(scene.seed));
    }
    backward(tape, loss);
    total += value;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (batch.size() > 1) {
    for (const auto& [name, t] : params.entries()) {
      Tensor p = t;
      for (double& g : p.mutable_grad()) g *= inv;
    }
  }
  StepReport report;
  report.loss = total * inv;
  report.lr = cosine_lr(state.step, cfg.steps, cfg.lr, cfg.lr_min);
  adamw_update(params, state, report.lr, {cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  return report;
}

double scene_loss(const Model& model, const SyntheticScene& scene) {
  NoGradScope no_grad;
  auto result = forward(model, scene.source, scene.target);
  return flow_loss(result, scene.flow, model.config().loss_weights).item();
}

pc::MetricsReport evaluate_scene(const Model& model, const SyntheticScene& scene, std::size_t iterations) {
  NoGradScope no_grad;
  auto result = forward(model, scene.source, scene.target, iterations);
  const auto& index = result.source_index.front();
  Tensor gt = gather_rows(scene.flow, index);
  return pc::evaluate(result.prediction(), gt);
}

std::vector<pc::MetricsReport> evaluate_iterations(const Model& model, const SyntheticScene& scene,
                                                   std::size_t iterations) {
  NoGradScope no_grad;
  auto result = forward(model, scene.source, scene.target, iterations);
  Tensor gt = gather_rows(scene.flow, result.source_index.front());
  std::vector<pc::MetricsReport> out;
  for (const Tensor& sf : result.flows.front()) out.push_back(pc::evaluate(sf, gt));
  return out;
}

void save_checkpoint(const ParamStore& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  for (const auto& [name, t] : params.entries()) out << name << '=' << shape_record(t.shape()) << '\n';
  out << '\n';
  for (const auto& [name, t] : params.entries()) {
    for (double d : t.data()) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(d));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

void load_checkpoint(ParamStore& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  std::vector<std::pair<std::string, std::string>> header;
  std::string line;
  for (;;) {
    if (!std::getline(in, line)) throw CheckpointError("checkpoint '" + path + "' has no header terminator");
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("checkpoint header line '" + line + "' lacks '='");
    header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto& entries = params.entries();
  for (std::size_t i = 0; i < std::max(header.size(), entries.size()); ++i) {
    if (i >= header.size()) throw CheckpointError("checkpoint lacks parameter '" + entries[i].first + "'");
    if (i >= entries.size()) throw CheckpointError("checkpoint has unexpected parameter '" + header[i].first + "'");
    const auto& [name, shape] = header[i];
    const std::string expected = shape_record(entries[i].second.shape());
    if (name != entries[i].first || shape != expected) {
      throw CheckpointError("checkpoint parameter mismatch at '" + entries[i].first + "' [" + expected +
                            "]: file has '" + name + "' [" + shape + "]");
    }
  }
  std::vector<std::vector<double>> payload;
  for (const auto& [name, t] : entries) {
    std::vector<double> values(t.numel());
    for (double& d : values) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
        throw CheckpointError("checkpoint '" + path + "' is truncated in '" + name + "'");
      }
      d = std::bit_cast<double>(to_little_endian(bits));
    }
    payload.push_back(std::move(values));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint '" + path + "' has trailing bytes");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].second;
    std::copy(payload[i].begin(), payload[i].end(), t.mutable_data().begin());
  }
}

}  // namespace ssmflow
