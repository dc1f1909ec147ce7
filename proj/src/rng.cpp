// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/rng.hpp"

#include <cmath>
#include <numbers>

namespace slicefl {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed),
      stream_(stream),
      key_(mix64(mix64(seed + kGolden) ^ mix64(stream * kGolden + 1))) {}

std::uint64_t Rng::next_u64() {
  const std::uint64_t n = counter_++;
  return mix64(mix64(key_ ^ (n * kGolden)) + key_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

std::uint64_t stream_id(std::string_view label, std::uint64_t a,
                        std::uint64_t b, std::uint64_t c) {
  // FNV-1a over the label, then fold in the indices.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  h = mix64(h ^ mix64(a + kGolden));
  h = mix64(h ^ mix64(b + 2 * kGolden));
  return mix64(h ^ mix64(c + 3 * kGolden));
}

}  // namespace slicefl
