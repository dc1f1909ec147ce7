// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/secure_backend.hpp"

#include <algorithm>
#include <cmath>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"

namespace slicefl {

namespace {

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

std::uint64_t bytes_of(const Tensor& t) { return t.numel() * sizeof(double); }

void accumulate(std::vector<double>* dst, const Tensor& src) {
  if (!dst) return;
  auto v = src.values();
  for (std::size_t i = 0; i < v.size(); ++i) (*dst)[i] += v[i];
}

}  // namespace

PadSource::PadSource(std::uint64_t seed, std::uint32_t party, PadLedger* ledger)
    : rng_(seed, stream_id("pads", party)), party_(party), ledger_(ledger) {}

MaskPad PadSource::next(const Shape& shape, const MaskDistribution& dist, std::string channel) {
  const std::uint64_t id = (static_cast<std::uint64_t>(party_) << 40) | ++counter_;
  MaskPad pad = gen_mask(shape, rng_, dist, id, std::move(channel));
  if (ledger_) ledger_->record_issue(pad);
  return pad;
}

SecureBackend::SecureBackend(const PartitionPlan& plan, std::string party, PadSource& pads,
                             Trace& trace, SecureOptions options)
    : plan_(plan), party_(std::move(party)), pads_(pads), trace_(trace),
      options_(std::move(options)) {}

std::string SecureBackend::party_of(const Site& s) const {
  return s.role == Role::Server ? "server" : party_;
}

void SecureBackend::emit(TraceEvent ev) {
  const bool breach = options_.strict && ev.is_violation();
  const std::string site = ev.site;
  trace_.record(std::move(ev));
  if (breach) throw SecurityBreach("plaintext reached the untrusted domain at " + site);
}

void SecureBackend::note(std::string_view site, OpClass) {
  const Site& s = plan_.site(site);
  TraceEvent ev;
  ev.kind = EventKind::Op;
  ev.site = s.name;
  ev.party = party_of(s);
  ev.domain = s.domain;
  ev.owner_local = s.owner_local;
  emit(std::move(ev));
}

MaskPad SecureBackend::take_pad(const Tensor& x, const std::string& channel) {
  if (options_.reuse_pad && retained_) {
    MaskPad pad = std::move(*retained_);
    retained_.reset();
    return pad;
  }
  return pads_.next(x.shape(), options_.mask.scaled_for(max_abs(x)), channel);
}

SecureBackend::Outbound SecureBackend::send_untrusted(const Site& s, Phase phase,
                                                      const std::vector<Tensor>& operands) {
  const bool skip = !skip_done_ && s.name == options_.skip_mask_at;
  if (skip) skip_done_ = true;
  Outbound out;
  std::uint64_t bytes = 0;
  for (std::size_t i = 0; i < operands.size(); ++i) {
    const Tensor& x = operands[i];
    bytes += bytes_of(x);
    if (skip) {
      out.payload.push_back(x.detach());
      out.pads.push_back(Tensor(x.shape()));
      continue;
    }
    MaskPad pad = take_pad(x, s.name + (phase == Phase::Backward ? "/bwd" : "/fwd"));
    out.pads.push_back(pad.values());
    MaskedTensor m = mask(x, pad, pads_.ledger());
    out.payload.push_back(m.payload);
    TraceEvent use;
    use.kind = EventKind::PadUse;
    use.phase = phase;
    use.site = s.name;
    use.party = party_of(s);
    use.pad_id = m.pad_id;
    emit(std::move(use));
    if (options_.reuse_pad && !retained_) retained_.emplace(std::move(pad));
  }
  const DataState state = skip ? DataState::Plaintext : DataState::Masked;
  TraceEvent crossing;
  crossing.kind = EventKind::Crossing;
  crossing.phase = phase;
  crossing.site = s.name;
  crossing.party = party_of(s);
  crossing.domain = TrustDomain::Untrusted;
  crossing.state = state;
  crossing.bytes = bytes;
  emit(crossing);
  TraceEvent op = crossing;
  op.kind = EventKind::Op;
  op.bytes = 0;
  emit(std::move(op));
  return out;
}

void SecureBackend::receive_trusted(const Site& s, Phase phase, std::uint64_t bytes) {
  TraceEvent ev;
  ev.kind = EventKind::Crossing;
  ev.phase = phase;
  ev.site = s.name;
  ev.party = party_of(s);
  ev.domain = TrustDomain::Trusted;
  ev.state = DataState::Masked;
  ev.bytes = bytes;
  emit(std::move(ev));
}

Tensor SecureBackend::offload_linear(const Site& s, Phase phase, const Tensor& x,
                                     const Tensor& w, bool transpose_w) {
  Outbound out = send_untrusted(s, phase, {x});
  auto h = [&](const Tensor& a) { return transpose_w ? matmul_nt(a, w) : matmul(a, w); };
  const Tensor y_en = h(out.payload[0]);  // untrusted
  receive_trusted(s, phase, bytes_of(y_en));
  return unmask_affine(y_en, h(out.pads[0]));
}

Tensor SecureBackend::frozen_linear(std::string_view site, const Tensor& x, const Tensor& w,
                                    const Tensor& b) {
  const Site& s = plan_.site(site);
  if (!s.masked_offload) {
    note(site, s.cls);
    return linear(x, w, b);
  }
  Tensor y = offload_linear(s, Phase::Forward, x.detach(), w, true);
  if (b.defined()) y = add_bias(y, b.detach());
  const Shape in_shape = x.shape();
  return make_result(y.shape(), std::vector<double>(y.values().begin(), y.values().end()), {x},
                     [this, &s, w, in_shape](std::span<const double> g,
                                             std::span<std::vector<double>*> in) {
                       const Tensor gy(Shape{g.size() / w.rows(), w.rows()},
                                       std::vector<double>(g.begin(), g.end()));
                       accumulate(in[0], offload_linear(s, Phase::Backward, gy, w, false));
                     });
}

Tensor SecureBackend::offload_scores(const Site& s, const Tensor& q, const Tensor& k,
                                     std::size_t n_heads) {
  const std::size_t dh = q.cols() / n_heads;
  Outbound out = send_untrusted(s, Phase::Forward, {q, transpose(k)});
  const Tensor& q_en = out.payload[0];
  const Tensor& kt_en = out.payload[1];
  std::vector<Tensor> s_en;
  std::uint64_t bytes = 0;
  for (std::size_t h = 0; h < n_heads; ++h) {  // untrusted
    s_en.push_back(matmul(slice_cols(q_en, h * dh, (h + 1) * dh),
                          slice_rows(kt_en, h * dh, (h + 1) * dh)));
    bytes += bytes_of(s_en.back());
  }
  receive_trusted(s, Phase::Forward, bytes);
  std::vector<Tensor> blocks;
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t lo = h * dh, hi = (h + 1) * dh;
    blocks.push_back(unmask_product(s_en[h], slice_cols(q_en, lo, hi), slice_rows(kt_en, lo, hi),
                                    slice_cols(out.pads[0], lo, hi),
                                    slice_rows(out.pads[1], lo, hi)));
  }
  return concat_rows(blocks);
}

void SecureBackend::offload_scores_grad(const Site& s, const Tensor& g, const Tensor& q,
                                        const Tensor& k, std::size_t n_heads, Tensor& dq,
                                        Tensor& dk) {
  const std::size_t dh = q.cols() / n_heads, seq = q.rows();
  Outbound out = send_untrusted(s, Phase::Backward, {g, k, q});
  const Tensor &g_en = out.payload[0], &k_en = out.payload[1], &q_en = out.payload[2];
  const Tensor &r_g = out.pads[0], &r_k = out.pads[1], &r_q = out.pads[2];
  std::vector<Tensor> a_en, b_en;
  std::uint64_t bytes = 0;
  for (std::size_t h = 0; h < n_heads; ++h) {  // untrusted
    const Tensor gh = slice_rows(g_en, h * seq, (h + 1) * seq);
    a_en.push_back(matmul(gh, slice_cols(k_en, h * dh, (h + 1) * dh)));
    b_en.push_back(matmul(transpose(gh), slice_cols(q_en, h * dh, (h + 1) * dh)));
    bytes += bytes_of(a_en.back()) + bytes_of(b_en.back());
  }
  receive_trusted(s, Phase::Backward, bytes);
  std::vector<Tensor> dqs, dks;
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t lo = h * dh, hi = (h + 1) * dh;
    const Tensor gh = slice_rows(g_en, h * seq, (h + 1) * seq);
    const Tensor rgh = slice_rows(r_g, h * seq, (h + 1) * seq);
    dqs.push_back(unmask_product(a_en[h], gh, slice_cols(k_en, lo, hi), rgh,
                                 slice_cols(r_k, lo, hi)));
    dks.push_back(unmask_product(b_en[h], transpose(gh), slice_cols(q_en, lo, hi),
                                 transpose(rgh), slice_cols(r_q, lo, hi)));
  }
  dq = concat_cols(dqs);
  dk = concat_cols(dks);
}

Tensor SecureBackend::attention_scores(std::string_view site, const Tensor& q, const Tensor& k,
                                       std::size_t n_heads) {
  const Site& s = plan_.site(site);
  if (!s.masked_offload) {
    note(site, s.cls);
    return stacked_head_scores(q, k, n_heads);
  }
  if (n_heads == 0 || q.cols() % n_heads != 0 || q.cols() != k.cols()) {
    throw DimensionError("attention_scores: bad head split of " + shape_str(q.shape()) +
                         " and " + shape_str(k.shape()));
  }
  const Tensor qd = q.detach(), kd = k.detach();
  const Tensor scores = offload_scores(s, qd, kd, n_heads);
  return make_result(
      scores.shape(), std::vector<double>(scores.values().begin(), scores.values().end()),
      {q, k},
      [this, &s, qd, kd, n_heads](std::span<const double> g, std::span<std::vector<double>*> in) {
        const Tensor gs(Shape{n_heads * qd.rows(), kd.rows()},
                        std::vector<double>(g.begin(), g.end()));
        Tensor dq, dk;
        offload_scores_grad(s, gs, qd, kd, n_heads, dq, dk);
        accumulate(in[0], dq);
        accumulate(in[1], dk);
      });
}

Tensor SecureBackend::cross_split(std::string_view site, const Tensor& x) {
  MaskPad pad = pads_.next(x.shape(), options_.mask.scaled_for(max_abs(x)), std::string(site));
  const Tensor r = pad.values();
  MaskedTensor m = mask(x, pad, pads_.ledger());
  TraceEvent use;
  use.kind = EventKind::PadUse;
  use.phase = Phase::Transfer;
  use.site = std::string(site);
  use.party = party_;
  use.pad_id = m.pad_id;
  emit(use);
  TraceEvent crossing;
  crossing.kind = EventKind::Crossing;
  crossing.phase = Phase::Transfer;
  crossing.site = std::string(site);
  crossing.party = party_;
  crossing.domain = TrustDomain::Trusted;
  crossing.state = DataState::Masked;
  crossing.bytes = bytes_of(m.payload);
  emit(std::move(crossing));
  return unmask(m, MaskPad(m.pad_id, r, {}));
}

DomainTensor secure_forward(SecureBackend& backend, const DomainTensor& x,
                            const Transformer& model, Rng* dropout_rng) {
  const PartitionPlan& plan = backend.plan();
  if (x.state != DataState::Plaintext || x.domain != plan.domain("embed")) {
    throw ContractError("secure_forward input must be plaintext in the " +
                        std::string(to_string(plan.domain("embed"))) + " domain");
  }
  const std::size_t n_layers = model.base().config.n_layers;
  Tensor h;
  if (plan.method() == Method::Method2) {
    h = model.forward_layers(x.inner, 0, plan.split_layer(), backend, dropout_rng);
    h = backend.cross_split("split", h);
    h = model.forward_layers(h, plan.split_layer(), n_layers, backend, dropout_rng);
  } else {
    h = model.forward_layers(x.inner, 0, n_layers, backend, dropout_rng);
  }
  DomainTensor out;
  out.inner = model.classify(h, backend);
  out.domain = plan.domain("head");
  out.state = DataState::Plaintext;
  out.lineage = x.lineage + 1;
  return out;
}

Tensor secure_logits(SecureBackend& backend, const Transformer& model,
                     std::span<const std::uint32_t> tokens, Rng* dropout_rng) {
  DomainTensor x;
  x.inner = model.embed(tokens, backend);
  x.domain = backend.plan().domain("embed");
  return secure_forward(backend, x, model, dropout_rng).inner;
}

}  // namespace slicefl
