// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "slicefl/tensor.hpp"

namespace slicefl {

struct AdamOptions {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over leaf tensors. Master values stay in double precision; a
/// parameter whose gradient is exactly zero for every step never moves.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  void step();
  void zero_grad();

  /// Points the optimizer at new parameter handles of identical shapes,
  /// keeping the moment estimates (used when a client loads a broadcast).
  void rebind(std::vector<Tensor> params);

  const AdamOptions& options() const { return options_; }
  long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamOptions options_;
  long t_ = 0;
};

/// Plain gradient descent.
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double lr);
  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  double lr_;
};

}  // namespace slicefl
