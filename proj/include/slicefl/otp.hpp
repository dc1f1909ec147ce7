// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>

#include <json.hpp>

#include "slicefl/rng.hpp"
#include "slicefl/tensor.hpp"

namespace slicefl {

struct MaskDistribution {
  enum class Kind { Uniform, Gaussian };
  Kind kind = Kind::Uniform;
  /// Uniform: half-width of [-scale, scale]. Gaussian: standard deviation.
  double scale = 1.0;
  /// When set, callers multiply `scale` by the magnitude of the tensor
  /// being masked (see scaled_for()).
  bool relative = true;

  /// Effective distribution for masking a tensor whose largest entry has
  /// absolute value `magnitude`.
  MaskDistribution scaled_for(double magnitude) const;
};

/// A single-use additive mask r. Pads are move-only so that the consumed
/// flag cannot be sidestepped by copying.
class MaskPad {
 public:
  MaskPad(std::uint64_t id, Tensor values, std::string channel);
  MaskPad(MaskPad&&) noexcept = default;
  MaskPad& operator=(MaskPad&&) noexcept = default;
  MaskPad(const MaskPad&) = delete;
  MaskPad& operator=(const MaskPad&) = delete;

  std::uint64_t id() const { return id_; }
  const Tensor& values() const { return values_; }
  const Shape& shape() const { return values_.shape(); }
  const std::string& channel() const { return channel_; }
  bool consumed() const { return consumed_; }

  /// Marks the pad used; throws MaskReuseError on the second call.
  void consume();

 private:
  std::uint64_t id_;
  Tensor values_;
  std::string channel_;
  bool consumed_ = false;
};

/// E_en = E + r together with the id of the pad that produced it.
struct MaskedTensor {
  Tensor payload;
  std::uint64_t pad_id = 0;
};

/// Registry of every pad issued and used in a run. Thread-safe.
class PadLedger {
 public:
  void record_issue(const MaskPad& pad);
  /// Counts a masking use of `pad_id`; a second use is recorded as reuse.
  void record_use(std::uint64_t pad_id);
  void record_rejected_reuse(std::uint64_t pad_id);

  std::size_t issued() const;
  std::size_t used() const;
  /// Pads used more than once.
  std::size_t reuse_count() const;
  std::size_t rejected_reuse_attempts() const;

  nlohmann::json to_json() const;

 private:
  struct Entry {
    std::string channel;
    Shape shape;
    std::uint32_t uses = 0;
  };
  mutable std::mutex mu_;
  std::map<std::uint64_t, Entry> entries_;
  std::size_t rejected_ = 0;
};

/// Fresh unconsumed pad with i.i.d. entries from `dist` (absolute scale;
/// relative distributions must be resolved with scaled_for() first).
MaskPad gen_mask(const Shape& shape, Rng& rng, const MaskDistribution& dist,
                 std::uint64_t id = 0, std::string channel = {});

/// payload = e + pad.values; consumes the pad.
MaskedTensor mask(const Tensor& e, MaskPad& pad, PadLedger* ledger = nullptr);

/// payload - pad.values.
Tensor unmask(const MaskedTensor& m, const MaskPad& pad);

/// h(E) = h(E_en) - h(r), where h_of_mask is the linear part of h applied
/// to r. Any bias of h belongs to h_of_payload only.
Tensor unmask_affine(const Tensor& h_of_payload, const Tensor& h_of_mask);

/// Recovers A.B from the untrusted product of two masked operands:
///   A.B = A_en.B_en - A_en.r_b - r_a.B_en + r_a.r_b
/// with A_en = A + r_a ([m x d]) and B_en = B + r_b ([d x n]).
Tensor unmask_product(const Tensor& a_en_b_en, const Tensor& a_en,
                      const Tensor& b_en, const Tensor& r_a, const Tensor& r_b);

/// unmask_product over masked tensors and their pads; q_en is [m x d] and
/// k_en is [d x n] (keys already transposed into score orientation).
Tensor unmask_matmul(const Tensor& qen_ken, const MaskedTensor& q_en,
                     const MaskedTensor& k_en, const MaskPad& r_q, const MaskPad& r_k);

}  // namespace slicefl
