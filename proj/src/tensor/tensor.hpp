// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tensor/errors.hpp"

namespace ssmflow {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized like data iff requires_grad
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major float64 array. Copies share storage; use clone() for a
/// deep copy. Forward ops never mutate their inputs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;
  std::size_t rows() const;  // shape[0]
  std::size_t cols() const;  // shape[1]; requires rank 2

  std::span<const double> data() const;
  /// Writable view. Only meant for leaves (parameters, inputs) outside a
  /// recording; mutating a recorded intermediate invalidates its backward.
  std::span<double> mutable_data();

  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  std::uint64_t id() const;

  /// Same values, fresh node with no history and no grad.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape shape, std::vector<double> values);
};

/// Creates an untracked tensor; ops call this then optionally record().
Tensor make_result(Shape shape, std::vector<double> values);

using BackwardFn =
    std::function<void(std::span<detail::Node* const> inputs, const detail::Node& output)>;

/// Ordered log of executed differentiable ops. Records are appended in
/// execution order, so every record's inputs were produced earlier.
class Tape {
 public:
  struct Record {
    std::vector<std::shared_ptr<detail::Node>> inputs;
    std::shared_ptr<detail::Node> output;
    BackwardFn backward;
  };

  void record(std::vector<std::shared_ptr<detail::Node>> inputs,
              std::shared_ptr<detail::Node> output, BackwardFn backward);
  const std::vector<Record>& records() const { return records_; }
  bool produced(const detail::Node* node) const;
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

 private:
  std::vector<Record> records_;
};

/// Makes `tape` the recording target on this thread for the scope lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording for the scope lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Records `output` as a function of `inputs` when a tape is active and any
/// input requires grad. Returns `output` (marked requires_grad if recorded).
Tensor record_op(std::initializer_list<Tensor> inputs, Tensor output, BackwardFn backward);
Tensor record_op(std::span<const Tensor> inputs, Tensor output, BackwardFn backward);

/// Reverse-mode sweep from a scalar loss. Accumulates into the grad slot of
/// every requires_grad leaf reachable on the tape.
void backward(const Tape& tape, const Tensor& loss);

// ---------------------------------------------------------------------------
// Operations. Rank-2 tensors are [rows x cols]; rank-1 tensors of length C are
// accepted wherever a per-column vector is expected.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// x[N x C] + bias[C] on every row.
Tensor add_row(const Tensor& x, const Tensor& bias);
Tensor exp(const Tensor& x);

enum class Activation { kSigmoid, kTanh, kSilu, kSoftplus, kRelu, kIdentity };
Activation parse_activation(const std::string& name);
Tensor activation(const Tensor& x, Activation kind);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor relu(const Tensor& x);
double softplus_value(double x);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Per-channel 1-D convolution along rows with zero padding (K-1)/2.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
/// out[i] = x[index[i]]; backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
Tensor reverse_rows(const Tensor& x);

/// x[(M*k) x C] -> [M x C], elementwise max over each group of k rows.
Tensor group_max(const Tensor& x, std::size_t k);
/// x[(M*k) x C], w[(M*k)] -> [M x C], sum_j w_j x_j over each group.
Tensor group_weighted_sum(const Tensor& x, const Tensor& w, std::size_t k);

/// Euclidean norm of every row, [N x C] -> [N x 1].
Tensor row_norms(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace ssmflow
