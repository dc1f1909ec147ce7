// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "slicefl/rng.hpp"
#include "slicefl/tensor.hpp"

namespace slicefl::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

inline Tensor random_param(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = random_tensor(shape, rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// max|a - b| / max|b|, with max|b| floored at 1e-300.
inline double rel_err(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  return diff / std::max(max_abs(b), 1e-300);
}

inline double rel_err(const Tensor& a, const Tensor& b) { return rel_err(a.values(), b.values()); }

/// Central differences of a scalar function of `x`'s values.
inline std::vector<double> numeric_grad(Tensor& x, const std::function<double()>& f,
                                        double h = 1e-6) {
  std::vector<double> g(x.numel());
  auto v = x.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + h;
    const double up = f();
    v[i] = saved - h;
    const double down = f();
    v[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace slicefl::testing
