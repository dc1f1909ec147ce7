// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/precision.hpp"

#include <cmath>
#include <string>

#include "slicefl/errors.hpp"

namespace slicefl {
namespace {

thread_local Precision t_precision = Precision::Exact;

}  // namespace

std::string_view to_string(Precision p) {
  return p == Precision::Exact ? "exact" : "simhalf";
}

Precision parse_precision(std::string_view text) {
  if (text == "exact") return Precision::Exact;
  if (text == "simhalf") return Precision::SimHalf;
  throw ContractError("unknown precision mode: " + std::string(text));
}

double sim_half(double x) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  int exponent = 0;
  const double mantissa = std::frexp(x, &exponent);  // |mantissa| in [0.5, 1)
  // nearbyint honours the default FE_TONEAREST mode, i.e. ties-to-even.
  const double scaled = std::nearbyint(std::ldexp(mantissa, 11));
  return std::ldexp(scaled, exponent - 11);
}

Precision current_precision() { return t_precision; }

double quantize(double x) {
  return t_precision == Precision::SimHalf ? sim_half(x) : x;
}

PrecisionScope::PrecisionScope(Precision p) : previous_(t_precision) {
  t_precision = p;
}

PrecisionScope::~PrecisionScope() { t_precision = previous_; }

}  // namespace slicefl
