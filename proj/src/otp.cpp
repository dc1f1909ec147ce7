// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/otp.hpp"

#include <algorithm>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"

namespace slicefl {

MaskDistribution MaskDistribution::scaled_for(double magnitude) const {
  MaskDistribution out = *this;
  if (relative) {
    // A floor keeps the pad nondegenerate for all-zero tensors.
    out.scale = scale * std::max(magnitude, 1e-6);
    out.relative = false;
  }
  return out;
}

MaskPad::MaskPad(std::uint64_t id, Tensor values, std::string channel)
    : id_(id), values_(std::move(values)), channel_(std::move(channel)) {}

void MaskPad::consume() {
  if (consumed_) {
    throw MaskReuseError("pad " + std::to_string(id_) + " on channel '" + channel_ +
                         "' was already used");
  }
  consumed_ = true;
}

void PadLedger::record_issue(const MaskPad& pad) {
  std::lock_guard lock(mu_);
  auto& e = entries_[pad.id()];
  e.channel = pad.channel();
  e.shape = pad.shape();
}

void PadLedger::record_use(std::uint64_t pad_id) {
  std::lock_guard lock(mu_);
  ++entries_[pad_id].uses;
}

void PadLedger::record_rejected_reuse(std::uint64_t) {
  std::lock_guard lock(mu_);
  ++rejected_;
}

std::size_t PadLedger::issued() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::size_t PadLedger::used() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [](const auto& kv) { return kv.second.uses > 0; }));
}

std::size_t PadLedger::reuse_count() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [](const auto& kv) { return kv.second.uses > 1; }));
}

std::size_t PadLedger::rejected_reuse_attempts() const {
  std::lock_guard lock(mu_);
  return rejected_;
}

nlohmann::json PadLedger::to_json() const {
  std::lock_guard lock(mu_);
  nlohmann::json pads = nlohmann::json::array();
  std::size_t used = 0, reused = 0;
  std::map<std::string, std::size_t> per_channel;
  for (const auto& [id, e] : entries_) {
    if (e.uses > 0) ++used;
    if (e.uses > 1) {
      ++reused;
      pads.push_back({{"id", id}, {"channel", e.channel}, {"uses", e.uses}});
    }
    // Channel names carry per-site suffixes; group on the leading label.
    ++per_channel[e.channel.substr(0, e.channel.find('/'))];
  }
  return {{"issued", entries_.size()},
          {"used", used},
          {"reused", reused},
          {"rejected_reuse_attempts", rejected_},
          {"issued_by_channel", per_channel},
          {"reused_pads", pads}};
}

MaskPad gen_mask(const Shape& shape, Rng& rng, const MaskDistribution& dist,
                 std::uint64_t id, std::string channel) {
  const std::size_t n = shape_numel(shape);
  if (shape.empty() || n == 0) throw DimensionError("gen_mask: empty shape");
  std::vector<double> values(n);
  if (dist.kind == MaskDistribution::Kind::Uniform) {
    for (double& v : values) v = rng.uniform(-dist.scale, dist.scale);
  } else {
    for (double& v : values) v = dist.scale * rng.normal();
  }
  return MaskPad(id, Tensor(shape, std::move(values)), std::move(channel));
}

MaskedTensor mask(const Tensor& e, MaskPad& pad, PadLedger* ledger) {
  if (pad.consumed()) {
    if (ledger) ledger->record_rejected_reuse(pad.id());
    pad.consume();  // throws MaskReuseError
  }
  if (e.shape() != pad.shape()) {
    throw DimensionError("mask: tensor " + shape_str(e.shape()) + " vs pad " +
                         shape_str(pad.shape()));
  }
  pad.consume();
  if (ledger) ledger->record_use(pad.id());
  return {add(e.detach(), pad.values()), pad.id()};
}

Tensor unmask(const MaskedTensor& m, const MaskPad& pad) {
  if (m.payload.shape() != pad.shape()) {
    throw DimensionError("unmask: payload " + shape_str(m.payload.shape()) + " vs pad " +
                         shape_str(pad.shape()));
  }
  return sub(m.payload, pad.values());
}

Tensor unmask_affine(const Tensor& h_of_payload, const Tensor& h_of_mask) {
  if (h_of_payload.shape() != h_of_mask.shape()) {
    throw DimensionError("unmask_affine: " + shape_str(h_of_payload.shape()) + " vs " +
                         shape_str(h_of_mask.shape()));
  }
  return sub(h_of_payload, h_of_mask);
}

Tensor unmask_product(const Tensor& a_en_b_en, const Tensor& a_en, const Tensor& b_en,
                      const Tensor& r_a, const Tensor& r_b) {
  if (a_en.shape() != r_a.shape() || b_en.shape() != r_b.shape()) {
    throw DimensionError("unmask_product: pad/payload shape mismatch");
  }
  if (a_en.ndim() != 2 || b_en.ndim() != 2 || a_en.cols() != b_en.rows()) {
    throw DimensionError("unmask_product: operands " + shape_str(a_en.shape()) + " . " +
                         shape_str(b_en.shape()));
  }
  if (a_en_b_en.shape() != Shape{a_en.rows(), b_en.cols()}) {
    throw DimensionError("unmask_product: product has shape " + shape_str(a_en_b_en.shape()));
  }
  Tensor out = sub(a_en_b_en, matmul(a_en, r_b));
  out = sub(out, matmul(r_a, b_en));
  return add(out, matmul(r_a, r_b));
}

Tensor unmask_matmul(const Tensor& qen_ken, const MaskedTensor& q_en,
                     const MaskedTensor& k_en, const MaskPad& r_q, const MaskPad& r_k) {
  if (q_en.pad_id != r_q.id() || k_en.pad_id != r_k.id()) {
    throw ContractError("unmask_matmul: pads do not match the masked operands");
  }
  return unmask_product(qen_ken, q_en.payload, k_en.payload, r_q.values(), r_k.values());
}

}  // namespace slicefl
