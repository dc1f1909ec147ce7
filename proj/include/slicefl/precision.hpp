// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace slicefl {

enum class Precision { Exact, SimHalf };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

/// Rounds x to 11 significant bits (binary16 significand) with
/// round-to-nearest-even. The exponent range is not clamped, so the result
/// models half-precision truncation without overflow or subnormals.
double sim_half(double x);

/// Precision in effect for tensor ops on the calling thread.
Precision current_precision();

/// Applies sim_half when the calling thread runs in SimHalf mode.
double quantize(double x);

/// Sets the thread's precision mode for the lifetime of the scope.
class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision previous_;
};

}  // namespace slicefl
