// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "slicefl/errors.hpp"
#include "slicefl/precision.hpp"

namespace slicefl {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::filled(Shape shape, double v) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.size() >= 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::values() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->value;
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->value[r * cols() + c];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on a non-scalar tensor");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

Tensor Tensor::grad_tensor() const {
  if (!has_grad()) return Tensor(shape());
  return Tensor(shape(), node_->grad);
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value); }

bool Tensor::is_leaf() const { return node_ && node_->parents.empty(); }

Tensor make_result(Shape shape, std::vector<double> values,
                   const std::vector<Tensor>& inputs, BackwardFn backward_fn) {
  if (current_precision() == Precision::SimHalf) {
    for (double& v : values) v = sim_half(v);
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor& t) { return t.requires_grad(); });
  if (tracked && backward_fn) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = [fn = std::move(backward_fn)](detail::Node& self) {
      std::vector<std::vector<double>*> in_grads;
      in_grads.reserve(self.parents.size());
      for (auto& p : self.parents) {
        in_grads.push_back(p->requires_grad ? &p->grad : nullptr);
      }
      fn(self.grad, in_grads);
    };
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Leaves accumulate across sweeps; interior nodes start from zero.
  for (detail::Node* n : order) {
    if (!n->parents.empty() || n->grad.size() != n->value.size()) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace slicefl
