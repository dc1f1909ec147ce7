// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace slicefl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient slot.
///
/// A Tensor is a handle: copies share the same storage and graph node.
/// Ops never modify their inputs; they return new tensors whose nodes keep
/// references to the inputs that require a gradient. Only leaf parameters
/// are updated in place, by optimizers through mutable_values().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor filled(Shape shape, double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t numel() const;
  /// First dimension of a 2-D tensor (1 for a 1-D tensor).
  std::size_t rows() const;
  /// Last dimension.
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  Tensor grad_tensor() const;
  void zero_grad();

  /// Copy of the values as a new leaf with no gradient tracking.
  Tensor detach() const;
  bool is_leaf() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                            std::function<void(std::span<const double>,
                                               std::span<std::vector<double>*>)>);

  std::shared_ptr<detail::Node> node_;
};

/// Signature of a custom backward: receives the output gradient and one
/// gradient buffer per input (nullptr when that input needs no gradient).
using BackwardFn = std::function<void(std::span<const double> out_grad,
                                      std::span<std::vector<double>*> in_grads)>;

/// Builds an op result. Values are quantized under SimHalf; the node joins
/// the graph only if some input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> values,
                   const std::vector<Tensor>& inputs, BackwardFn backward);

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable tensor that requires a gradient.
void backward(const Tensor& loss);

}  // namespace slicefl
