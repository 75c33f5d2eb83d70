// SPDX-License-Identifier: Apache-2.0
#include "transgan/tensor.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "transgan/ops.hpp"

TRANSGAN_BEGIN_NAMESPACE

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::shared_ptr<std::vector<Real>> storage,
                                     bool requires_grad) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor extents must be positive: " + shape_to_string(shape));
  if (shape_numel(shape) != storage->size())
    throw DimensionError("data length " + std::to_string(storage->size()) +
                         " does not match shape " + shape_to_string(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->storage = std::move(storage);
  impl->requires_grad = requires_grad;
  return impl;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<Real> data, bool requires_grad)
    : impl_(new_impl(std::move(shape), std::make_shared<std::vector<Real>>(std::move(data)),
                     requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Real(0), requires_grad);
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), Real(1), requires_grad);
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<Real>{value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape()));
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->storage->size(); }

std::span<const Real> Tensor::data() const { return *impl_->storage; }

std::span<Real> Tensor::mutable_data() { return *impl_->storage; }

Real Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return (*impl_->storage)[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw GraphError("requires_grad can only be changed on leaves");
  impl_->requires_grad = value;
}

bool Tensor::is_leaf() const { return impl_->node == nullptr; }

Tensor Tensor::grad() const {
  if (!impl_->grad) return {};
  return Tensor(impl_->grad);
}

void Tensor::set_grad(const Tensor& g) {
  if (g.defined() && g.shape() != shape())
    throw DimensionError("gradient shape " + shape_to_string(g.shape()) + " != tensor shape " +
                         shape_to_string(shape()));
  impl_->grad = g.impl_;
}

void Tensor::zero_grad() { impl_->grad.reset(); }

Tensor Tensor::detach() const { return Tensor(new_impl(impl_->shape, impl_->storage, false)); }

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, std::vector<Real>(impl_->storage->begin(), impl_->storage->end()),
                impl_->requires_grad && is_leaf());
}

const std::shared_ptr<Node>& Tensor::node() const { return impl_->node; }

Tensor make_op_result(Shape shape, std::shared_ptr<std::vector<Real>> storage, const char* op,
                      std::vector<Tensor> inputs, BackwardFn backward) {
  bool needs_grad = false;
  if (g_grad_enabled)
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  auto impl = new_impl(std::move(shape), std::move(storage), needs_grad);
  if (needs_grad) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    impl->node = std::move(node);
  }
  return Tensor::from_impl(std::move(impl));
}

Tensor make_op_result(Shape shape, std::vector<Real> data, const char* op,
                      std::vector<Tensor> inputs, BackwardFn backward) {
  return make_op_result(std::move(shape), std::make_shared<std::vector<Real>>(std::move(data)),
                        op, std::move(inputs), std::move(backward));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) {
  g_grad_enabled = enabled;
}
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

namespace {

// Post-order over the graph below `root`: every tensor appears after all
// tensors it was computed from.
std::vector<Tensor> topological_order(const Tensor& root) {
  std::vector<Tensor> order;
  std::unordered_set<const TensorImpl*> visited;
  struct Frame {
    Tensor tensor;
    std::size_t next_input = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({root});
  visited.insert(root.id());
  while (!stack.empty()) {
    auto& frame = stack.back();
    const auto& node = frame.tensor.node();
    if (node && node->released)
      throw GraphError("graph already consumed by a backward pass (op '" + node->op +
                       "'); pass retain_graph to differentiate twice");
    if (node && frame.next_input < node->inputs.size()) {
      const Tensor& in = node->inputs[frame.next_input++];
      if (in.requires_grad() && visited.insert(in.id()).second) stack.push_back({in});
      continue;
    }
    order.push_back(std::move(frame.tensor));
    stack.pop_back();
  }
  return order;
}

Tensor accumulate(const Tensor& existing, const Tensor& g) {
  if (!existing.defined()) return g;
  return add(existing, g);
}

struct PassResult {
  Tensor target_grad;
  bool target_reached = false;
};

PassResult run_pass(const Tensor& root, bool create_graph, bool accumulate_leaves,
                    const TensorImpl* target) {
  if (root.numel() != 1)
    throw GraphError("backward requires a scalar loss, got shape " +
                     shape_to_string(root.shape()));
  PassResult result;
  if (!root.requires_grad()) return result;

  auto order = topological_order(root);
  GradModeGuard mode(create_graph);

  std::unordered_map<const TensorImpl*, Tensor> grads;
  grads.emplace(root.id(), Tensor::ones(root.shape()));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& t = *it;
    auto found = grads.find(t.id());
    if (found == grads.end()) continue;
    Tensor g = std::move(found->second);
    grads.erase(found);

    if (t.id() == target) {
      result.target_grad = g;
      result.target_reached = true;
      continue;
    }
    if (t.is_leaf()) {
      if (accumulate_leaves && t.requires_grad()) {
        Tensor leaf = t;
        leaf.set_grad(accumulate(leaf.grad(), create_graph ? g : g.detach()));
      }
      continue;
    }
    const auto& node = t.node();
    auto input_grads = node->backward(g, t);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Tensor& in = node->inputs[i];
      if (!in.requires_grad() || i >= input_grads.size() || !input_grads[i].defined()) continue;
      if (input_grads[i].shape() != in.shape())
        throw GraphError("backward of '" + node->op + "' produced gradient of shape " +
                         shape_to_string(input_grads[i].shape()) + " for input of shape " +
                         shape_to_string(in.shape()));
      auto& slot = grads[in.id()];
      slot = accumulate(slot, input_grads[i]);
    }
  }

  if (!create_graph) {
    for (auto& t : order) {
      if (auto& node = t.node()) {
        node->released = true;
        node->backward = nullptr;
        node->inputs.clear();
      }
    }
  }
  return result;
}

}  // namespace

void backward(const Tensor& loss, bool retain_graph) {
  run_pass(loss, retain_graph, true, nullptr);
}

Tensor input_gradient(const Tensor& output, const Tensor& wrt) {
  auto result = run_pass(output, true, false, wrt.id());
  if (!result.target_reached) {
    if (output.requires_grad() && wrt.requires_grad()) {
      // wrt is part of the graph but every path to it carries no gradient.
      auto order = topological_order(output);
      for (const auto& t : order)
        if (t.id() == wrt.id()) return Tensor::zeros(wrt.shape());
    }
    throw GraphError("input_gradient: tensor of shape " + shape_to_string(wrt.shape()) +
                     " did not participate in producing the output");
  }
  return result.target_grad;
}

TRANSGAN_END_NAMESPACE
