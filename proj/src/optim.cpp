// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/optim.hpp"

#include <cmath>

#include "slicefl/errors.hpp"

namespace slicefl {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Tensor& p : params_) {
    if (!p.is_leaf()) throw ContractError("Adam: parameters must be leaf tensors");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::rebind(std::vector<Tensor> params) {
  if (params.size() != params_.size()) throw ContractError("Adam::rebind: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != params_[i].numel()) {
      throw DimensionError("Adam::rebind: parameter " + std::to_string(i) + " changed size");
    }
  }
  params_ = std::move(params);
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      if (m[j] == 0.0) continue;
      w[j] -= options_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

Sgd::Sgd(std::vector<Tensor> params, double lr) : params_(std::move(params)), lr_(lr) {}

void Sgd::step() {
  for (Tensor& p : params_) {
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_values();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr_ * g[j];
  }
}

void Sgd::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace slicefl
