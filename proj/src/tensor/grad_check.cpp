// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ssmflow {

namespace {

double evaluate(const std::function<Tensor()>& fn) {
  NoGradScope no_grad;
  Tensor out = fn();
  if (out.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  return out.item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> params,
                           const GradCheckOptions& options, const std::vector<std::string>& names) {
  if (options.step < 1e-7 || options.step > 1e-4) {
    throw DomainError("grad_check: step must lie in [1e-7, 1e-4]");
  }
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = fn();
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: loss is not finite");
    backward(tape, loss);
  }

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry entry;
    entry.name = p < names.size() ? names[p] : "param" + std::to_string(p);
    auto values = params[p].mutable_data();
    auto grads = params[p].grad();
    std::size_t count = values.size();
    std::size_t stride = 1;
    if (options.max_elements > 0 && count > options.max_elements) {
      stride = (count + options.max_elements - 1) / options.max_elements;
    }
    for (std::size_t i = 0; i < count; i += stride) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = evaluate(fn);
      values[i] = saved - options.step;
      const double down = evaluate(fn);
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite value perturbing " + entry.name + "[" +
                           std::to_string(i) + "]");
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = grads[i];
      if (!std::isfinite(analytic)) {
        throw NumericError("grad_check: non-finite analytic gradient at " + entry.name + "[" +
                           std::to_string(i) + "]");
      }
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      if (i == 0 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace ssmflow
