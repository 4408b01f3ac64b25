// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "tensor/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ssmflow {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local Tape* t_active_tape = nullptr;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<detail::Node>();
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  node->shape = std::move(shape);
  node->data = std::move(values);
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor make_result(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  Tensor t = make_result(std::move(shape), std::vector<double>(n, value));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  Tensor t = make_result(std::move(shape), std::move(values));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }
std::size_t Tensor::rows() const { return size(0); }

std::size_t Tensor::cols() const {
  if (node_->shape.size() != 2) {
    throw DimensionError("expected a rank-2 tensor, got " + shape_str(node_->shape));
  }
  return node_->shape[1];
}

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->ensure_grad();
  } else {
    node_->grad.clear();
  }
}

std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad; }

void Tensor::zero_grad() {
  if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

std::uint64_t Tensor::id() const { return node_->id; }

Tensor Tensor::detach() const { return make_result(node_->shape, node_->data); }

// ---------------------------------------------------------------------------

void Tape::record(std::vector<std::shared_ptr<detail::Node>> inputs,
                  std::shared_ptr<detail::Node> output, BackwardFn backward) {
  records_.push_back(Record{std::move(inputs), std::move(output), std::move(backward)});
}

bool Tape::produced(const detail::Node* node) const {
  return std::any_of(records_.begin(), records_.end(),
                     [node](const Record& r) { return r.output.get() == node; });
}

TapeScope::TapeScope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }
TapeScope::~TapeScope() { t_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(t_active_tape) { t_active_tape = nullptr; }
NoGradScope::~NoGradScope() { t_active_tape = previous_; }

Tape* active_tape() { return t_active_tape; }

Tensor record_op(std::span<const Tensor> inputs, Tensor output, BackwardFn backward) {
  Tape* tape = t_active_tape;
  if (tape == nullptr) return output;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return output;
  std::vector<std::shared_ptr<detail::Node>> nodes;
  nodes.reserve(inputs.size());
  for (const auto& t : inputs) nodes.push_back(t.node_ptr());
  output.set_requires_grad(true);
  tape->record(std::move(nodes), output.node_ptr(), std::move(backward));
  return output;
}

Tensor record_op(std::initializer_list<Tensor> inputs, Tensor output, BackwardFn backward) {
  return record_op(std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(output),
                   std::move(backward));
}

void backward(const Tape& tape, const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  detail::Node* root = loss.node();
  if (!root->requires_grad) {
    throw ContractError("loss does not depend on any tensor that requires grad");
  }
  const auto& records = tape.records();
  std::size_t end = records.size();
  while (end > 0 && records[end - 1].output.get() != root) --end;
  root->ensure_grad();
  root->grad[0] += 1.0;
  // end == 0: the loss is a leaf and already holds its own gradient.
  std::vector<detail::Node*> inputs;
  for (std::size_t r = end; r-- > 0;) {
    const auto& rec = records[r];
    if (rec.output->grad.empty()) continue;
    inputs.clear();
    for (const auto& in : rec.inputs) {
      if (in && in->requires_grad) in->ensure_grad();
      inputs.push_back(in.get());
    }
    rec.backward(inputs, *rec.output);
  }
}

// ---------------------------------------------------------------------------
// Helpers shared by the op implementations.

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

bool wants(const detail::Node* n) { return n != nullptr && n->requires_grad; }

template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  Tensor y = make_result(x.shape(), std::move(out));
  return record_op({x}, y, [df](std::span<detail::Node* const> in, const detail::Node& o) {
    auto* xn = in[0];
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      xn->grad[i] += o.grad[i] * df(xn->data[i], o.data[i]);
    }
  });
}

double sigmoid_value(double x) {
  if (x >= 0) {
    double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  Tensor y = make_result({m, n}, std::move(out));
  return record_op({a, b}, y, [m, k, n](std::span<detail::Node* const> in, const detail::Node& o) {
    const auto& g = o.grad;
    if (wants(in[0])) {
      // dA = G * B^T, accumulated row by row against an explicit B^T.
      const auto& bdat = in[1]->data;
      std::vector<double> bt(k * n);
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = bdat[p * n + j];
      }
      auto& ga = in[0]->grad;
      for (std::size_t i = 0; i < m; ++i) {
        double* row = ga.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          const double* btrow = bt.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) row[p] += gij * btrow[p];
        }
      }
    }
    if (wants(in[1])) {
      // dB = A^T * G
      const auto& adat = in[0]->data;
      auto& gb = in[1]->grad;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = adat[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tensor y = make_result(a.shape(), std::move(out));
  return record_op({a, b}, y, [](std::span<detail::Node* const> in, const detail::Node& o) {
    for (int s = 0; s < 2; ++s) {
      if (!wants(in[s])) continue;
      for (std::size_t i = 0; i < o.grad.size(); ++i) in[s]->grad[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  Tensor y = make_result(a.shape(), std::move(out));
  return record_op({a, b}, y, [](std::span<detail::Node* const> in, const detail::Node& o) {
    if (wants(in[0])) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) in[0]->grad[i] += o.grad[i];
    }
    if (wants(in[1])) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) in[1]->grad[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tensor y = make_result(a.shape(), std::move(out));
  return record_op({a, b}, y, [](std::span<detail::Node* const> in, const detail::Node& o) {
    if (wants(in[0])) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) in[0]->grad[i] += o.grad[i] * in[1]->data[i];
    }
    if (wants(in[1])) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) in[1]->grad[i] += o.grad[i] * in[0]->data[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_row");
  const std::size_t n = x.rows(), c = x.cols();
  if (bias.numel() != c) {
    throw DimensionError("add_row: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  auto xd = x.data(), bd = bias.data();
  std::vector<double> out(xd.begin(), xd.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bd[j];
  }
  Tensor y = make_result(x.shape(), std::move(out));
  return record_op({x, bias}, y, [n, c](std::span<detail::Node* const> in, const detail::Node& o) {
    if (wants(in[0])) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) in[0]->grad[i] += o.grad[i];
    }
    if (wants(in[1])) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) in[1]->grad[j] += o.grad[i * c + j];
      }
    }
  });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

double softplus_value(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

Activation parse_activation(const std::string& name) {
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  if (name == "silu") return Activation::kSilu;
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return sigmoid_value(v); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, [](double v) { return v * sigmoid_value(v); },
      [](double v, double) {
        double s = sigmoid_value(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, [](double v) { return softplus_value(v); },
      [](double v, double) { return v > 30.0 ? 1.0 : sigmoid_value(v); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kTanh: return tanh(x);
    case Activation::kSilu: return silu(x);
    case Activation::kSoftplus: return softplus(x);
    case Activation::kRelu: return relu(x);
    case Activation::kIdentity: return x;
  }
  throw ConfigError("unknown activation kind");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t n = x.rows(), c = x.cols();
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match " + shape_str(x.shape()));
  }
  if (!(eps > 0.0)) throw DomainError("layer_norm: eps must be positive");
  auto xd = x.data(), gd = gamma.data(), bd = beta.data();
  std::vector<double> out(n * c);
  std::vector<double> xhat(n * c);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xd.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      double xh = (row[j] - mu) * is;
      xhat[i * c + j] = xh;
      out[i * c + j] = xh * gd[j] + bd[j];
    }
  }
  Tensor y = make_result(x.shape(), std::move(out));
  return record_op(
      {x, gamma, beta}, y,
      [n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          std::span<detail::Node* const> in, const detail::Node& o) {
        const auto& g = o.grad;
        const auto& gam = in[1]->data;
        if (wants(in[0])) {
          auto& gx = in[0]->grad;
          for (std::size_t i = 0; i < n; ++i) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              double d = g[i * c + j] * gam[j];
              sum_d += d;
              sum_dx += d * xhat[i * c + j];
            }
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j) {
              double d = g[i * c + j] * gam[j];
              gx[i * c + j] += inv_std[i] * (d - inv_c * sum_d - xhat[i * c + j] * inv_c * sum_dx);
            }
          }
        }
        if (wants(in[1])) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) in[1]->grad[j] += g[i * c + j] * xhat[i * c + j];
          }
        }
        if (wants(in[2])) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) in[2]->grad[j] += g[i * c + j];
          }
        }
      });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel) {
  require_rank2(x, "depthwise_conv1d");
  require_rank2(kernel, "depthwise_conv1d");
  const std::size_t len = x.rows(), c = x.cols(), kw = kernel.rows();
  if (kernel.cols() != c) {
    throw DimensionError("depthwise_conv1d: kernel " + shape_str(kernel.shape()) +
                         " does not match input " + shape_str(x.shape()));
  }
  if (kw % 2 == 0) throw ConfigError("depthwise_conv1d: kernel width must be odd, got " + std::to_string(kw));
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kw / 2);
  const auto L = static_cast<std::ptrdiff_t>(len);
  auto xd = x.data(), kd = kernel.data();
  std::vector<double> out(len * c, 0.0);
  for (std::ptrdiff_t t = 0; t < L; ++t) {
    for (std::size_t r = 0; r < kw; ++r) {
      std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(r) - half;
      if (src < 0 || src >= L) continue;
      for (std::size_t j = 0; j < c; ++j) {
        out[static_cast<std::size_t>(t) * c + j] += kd[r * c + j] * xd[static_cast<std::size_t>(src) * c + j];
      }
    }
  }
  Tensor y = make_result(x.shape(), std::move(out));
  return record_op({x, kernel}, y,
                   [L, c, kw, half](std::span<detail::Node* const> in, const detail::Node& o) {
                     const auto& g = o.grad;
                     for (std::ptrdiff_t t = 0; t < L; ++t) {
                       for (std::size_t r = 0; r < kw; ++r) {
                         std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(r) - half;
                         if (src < 0 || src >= L) continue;
                         auto ts = static_cast<std::size_t>(t), ss = static_cast<std::size_t>(src);
                         for (std::size_t j = 0; j < c; ++j) {
                           if (wants(in[0])) in[0]->grad[ss * c + j] += g[ts * c + j] * in[1]->data[r * c + j];
                           if (wants(in[1])) in[1]->grad[r * c + j] += g[ts * c + j] * in[0]->data[ss * c + j];
                         }
                       }
                     }
                   });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row counts differ, " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pd = parts[k].data();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(pd.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    }
    offset += widths[k];
  }
  Tensor y = make_result({n, total}, std::move(out));
  return record_op(parts, y,
                   [n, total, widths](std::span<detail::Node* const> in, const detail::Node& o) {
                     std::size_t off = 0;
                     for (std::size_t k = 0; k < in.size(); ++k) {
                       if (wants(in[k])) {
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t j = 0; j < widths[k]; ++j) {
                             in[k]->grad[i * widths[k] + j] += o.grad[i * total + off + j];
                           }
                         }
                       }
                       off += widths[k];
                     }
                   });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t n = x.rows(), c = x.cols();
  if (begin >= end || end > c) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  auto xd = x.data();
  std::vector<double> out(n * w);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(xd.data() + i * c + begin, w, out.data() + i * w);
  Tensor y = make_result({n, w}, std::move(out));
  return record_op({x}, y, [n, c, w, begin](std::span<detail::Node* const> in, const detail::Node& o) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) in[0]->grad[i * c + begin + j] += o.grad[i * w + j];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_rank2(x, "gather_rows");
  const std::size_t n = x.rows(), c = x.cols(), m = index.size();
  if (m == 0) throw DimensionError("gather_rows: empty index");
  auto xd = x.data();
  std::vector<double> out(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(index[i]) + " out of range for " +
                           shape_str(x.shape()));
    }
    std::copy_n(xd.data() + index[i] * c, c, out.data() + i * c);
  }
  Tensor y = make_result({m, c}, std::move(out));
  std::vector<std::size_t> idx(index.begin(), index.end());
  return record_op({x}, y, [c, idx = std::move(idx)](std::span<detail::Node* const> in, const detail::Node& o) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = in[0]->grad.data() + idx[i] * c;
      const double* src = o.grad.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Tensor reverse_rows(const Tensor& x) {
  std::vector<std::size_t> idx(x.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = idx.size() - 1 - i;
  return gather_rows(x, idx);
}

Tensor group_max(const Tensor& x, std::size_t k) {
  require_rank2(x, "group_max");
  if (k == 0) throw ContractError("group_max: group size must be positive");
  const std::size_t rows = x.rows(), c = x.cols();
  if (rows % k != 0) {
    throw DimensionError("group_max: " + std::to_string(rows) + " rows not divisible by " + std::to_string(k));
  }
  const std::size_t m = rows / k;
  auto xd = x.data();
  std::vector<double> out(m * c);
  std::vector<std::size_t> argmax(m * c);
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = g * k;
      double v = xd[best * c + j];
      for (std::size_t r = 1; r < k; ++r) {
        double cand = xd[(g * k + r) * c + j];
        if (cand > v) {
          v = cand;
          best = g * k + r;
        }
      }
      out[g * c + j] = v;
      argmax[g * c + j] = best;
    }
  }
  Tensor y = make_result({m, c}, std::move(out));
  return record_op({x}, y, [c, argmax = std::move(argmax)](std::span<detail::Node* const> in, const detail::Node& o) {
    for (std::size_t i = 0; i < argmax.size(); ++i) {
      in[0]->grad[argmax[i] * c + (i % c)] += o.grad[i];
    }
  });
}

Tensor group_weighted_sum(const Tensor& x, const Tensor& w, std::size_t k) {
  require_rank2(x, "group_weighted_sum");
  if (k == 0) throw ContractError("group_weighted_sum: group size must be positive");
  const std::size_t rows = x.rows(), c = x.cols();
  if (rows % k != 0 || w.numel() != rows) {
    throw DimensionError("group_weighted_sum: input " + shape_str(x.shape()) + ", weights " +
                         shape_str(w.shape()) + ", group " + std::to_string(k));
  }
  const std::size_t m = rows / k;
  auto xd = x.data(), wd = w.data();
  std::vector<double> out(m * c, 0.0);
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t row = g * k + r;
      for (std::size_t j = 0; j < c; ++j) out[g * c + j] += wd[row] * xd[row * c + j];
    }
  }
  Tensor y = make_result({m, c}, std::move(out));
  return record_op({x, w}, y, [m, k, c](std::span<detail::Node* const> in, const detail::Node& o) {
    for (std::size_t g = 0; g < m; ++g) {
      for (std::size_t r = 0; r < k; ++r) {
        const std::size_t row = g * k + r;
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          if (wants(in[0])) in[0]->grad[row * c + j] += in[1]->data[row] * o.grad[g * c + j];
          acc += in[0]->data[row * c + j] * o.grad[g * c + j];
        }
        if (wants(in[1])) in[1]->grad[row] += acc;
      }
    }
  });
}

Tensor row_norms(const Tensor& x) {
  require_rank2(x, "row_norms");
  const std::size_t n = x.rows(), c = x.cols();
  auto xd = x.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xd[i * c + j] * xd[i * c + j];
    out[i] = std::sqrt(s);
  }
  Tensor y = make_result({n, 1}, std::move(out));
  // The subgradient at a zero row is taken as zero.
  return record_op({x}, y, [n, c](std::span<detail::Node* const> in, const detail::Node& o) {
    for (std::size_t i = 0; i < n; ++i) {
      if (o.data[i] == 0.0) continue;
      const double f = o.grad[i] / o.data[i];
      for (std::size_t j = 0; j < c; ++j) in[0]->grad[i * c + j] += f * in[0]->data[i * c + j];
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor y = make_result({1}, {s});
  return record_op({x}, y, [](std::span<detail::Node* const> in, const detail::Node& o) {
    for (auto& g : in[0]->grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

}  // namespace ssmflow
