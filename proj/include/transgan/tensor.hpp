// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "transgan/precision.hpp"

TRANSGAN_BEGIN_NAMESPACE

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Misuse of the differentiation graph (consumed graph, missing input, ...).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A softmax slice had no finite entry.
class MaskError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Tensor;
struct Node;
struct TensorImpl;

/// Backward rule of one recorded operation. Receives the gradient flowing
/// into the operation's output and the output itself, and returns one
/// gradient per input (undefined tensors for inputs that get none). Rules are
/// written in terms of differentiable tensor ops, so running them with grad
/// mode enabled records a graph for the gradient itself.
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad_out, const Tensor& out)>;

/// Dense row-major real tensor with value semantics for data and shared
/// identity for graph bookkeeping. Copies are cheap handles to the same
/// tensor.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const Real> data() const;
  /// In-place access for leaves: initialization, optimizer updates,
  /// checkpoint restore. Never used on tensors that feed a live graph.
  std::span<Real> mutable_data();
  Real item() const;
  Real operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  /// Accumulated gradient; undefined until a backward pass reaches this leaf.
  Tensor grad() const;
  void set_grad(const Tensor& g);
  void zero_grad();

  /// Same data, no graph history, no gradient requirement.
  Tensor detach() const;
  /// Deep copy of the data into a fresh leaf.
  Tensor clone() const;

  const std::shared_ptr<Node>& node() const;
  const TensorImpl* id() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<Real>> storage;
  bool requires_grad = false;
  std::shared_ptr<TensorImpl> grad;
  std::shared_ptr<Node> node;
};

/// One record of the dynamic tape.
struct Node {
  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
  bool released = false;
};

/// Builds the output of an operation, attaching a graph node when grad mode
/// is on and any input requires a gradient.
Tensor make_op_result(Shape shape, std::shared_ptr<std::vector<Real>> storage, const char* op,
                      std::vector<Tensor> inputs, BackwardFn backward);
Tensor make_op_result(Shape shape, std::vector<Real> data, const char* op,
                      std::vector<Tensor> inputs, BackwardFn backward);

bool grad_enabled();

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse-mode pass from a scalar loss. Gradients are accumulated into the
/// `grad` of every leaf that requires one. With `retain_graph` the graph is
/// kept and the accumulated gradients are themselves differentiable;
/// otherwise the graph is released and a second pass raises GraphError.
void backward(const Tensor& loss, bool retain_graph = false);

/// Differentiable gradient of a scalar with respect to one tensor of its
/// graph. Leaf gradients are left untouched and the graph is retained.
Tensor input_gradient(const Tensor& output, const Tensor& wrt);

TRANSGAN_END_NAMESPACE
