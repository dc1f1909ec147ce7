// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/cost.hpp"

#include <algorithm>
#include <string>

#include "slicefl/errors.hpp"

namespace slicefl {

double CostModel::weight(OpClass cls, TrustDomain domain) const {
  const auto& table = domain == TrustDomain::Trusted ? trusted : untrusted;
  auto it = table.find(cls);
  if (it != table.end()) return it->second;
  return domain == TrustDomain::Trusted ? trusted_default : untrusted_default;
}

void CostModel::validate() const {
  auto check = [](double w, const std::string& what) {
    if (!(w >= 0.0)) throw ContractError("cost weight '" + what + "' must be >= 0");
  };
  check(trusted_default, "trusted");
  check(untrusted_default, "untrusted");
  check(crossing, "crossing");
  check(masked_byte, "masked_byte");
  check(offline, "offline");
  for (const auto& [cls, w] : trusted) check(w, "trusted." + std::string(to_string(cls)));
  for (const auto& [cls, w] : untrusted) check(w, "untrusted." + std::string(to_string(cls)));
}

nlohmann::json CostModel::to_json() const {
  nlohmann::json t = nlohmann::json::object(), u = nlohmann::json::object();
  for (const auto& [cls, w] : trusted) t[std::string(to_string(cls))] = w;
  for (const auto& [cls, w] : untrusted) u[std::string(to_string(cls))] = w;
  return {{"trusted_default", trusted_default}, {"untrusted_default", untrusted_default},
          {"trusted", t},                      {"untrusted", u},
          {"crossing", crossing},              {"masked_byte", masked_byte},
          {"offline", offline}};
}

nlohmann::json CostReport::to_json() const {
  return {{"method", to_string(method)},
          {"trusted_compute", trusted_compute},
          {"untrusted_compute", untrusted_compute},
          {"offline_compute", offline_compute},
          {"crossing_cost", crossing_cost},
          {"masked_byte_cost", masked_byte_cost},
          {"total", total},
          {"crossings", crossings},
          {"masked_bytes", masked_bytes}};
}

namespace {

struct Dims {
  double s, n, d, h, ff, c, p;
};

bool has_lora(const TuningConfig& t, std::size_t layer, LinearKind kind) {
  if (layer < t.first_layer) return false;
  if (t.mode == TuningMode::Lora) {
    return std::find(t.lora_targets.begin(), t.lora_targets.end(), kind) != t.lora_targets.end();
  }
  return t.mode == TuningMode::Spf && (kind == LinearKind::Fc1 || kind == LinearKind::Fc2);
}

std::pair<double, double> linear_dims(const Site& s, const TransformerConfig& c) {
  const double d = static_cast<double>(c.d_model), ff = static_cast<double>(c.d_ff);
  const std::string op = s.name.substr(s.name.find('.') + 1);
  if (op.starts_with("qkv")) return {d, 3 * d};
  if (op.starts_with("dense")) return {d, d};
  if (op.starts_with("fc1")) return {d, ff};
  return {ff, d};
}

LinearKind linear_kind(const Site& s) {
  const std::string op = s.name.substr(s.name.find('.') + 1);
  return parse_linear_kind(op.substr(0, op.find('.')));
}

bool has_spf(const TuningConfig& t, const Site& s) {
  if (t.mode != TuningMode::Spf || s.cls != OpClass::Linear || s.layer < t.first_layer) {
    return false;
  }
  const LinearKind kind = linear_kind(s);
  return kind == LinearKind::Qkv || kind == LinearKind::Dense;
}

/// Backward passes of a site relative to its forward work: 2 for an input
/// gradient and a weight gradient, 1 for a frozen linear (input gradient
/// only), 0 where no gradient is needed.
double backward_passes(const Site& s, const TuningConfig& t, std::size_t grad_start) {
  if (s.cls == OpClass::Embedding) return 0;
  if (s.layer != Site::kNoLayer && s.layer < grad_start) return 0;
  const bool trainable = s.cls == OpClass::Adapter || s.cls == OpClass::Head || has_spf(t, s);
  const bool frontier = s.layer == grad_start &&
                        (s.name.ends_with(".ln1") || s.name.ends_with(".qkv"));
  if (frontier) return trainable ? 1 : 0;
  if (s.cls == OpClass::Linear && !trainable) return 1;
  return 2;
}

/// Forward work units of one site.
double site_work(const Site& s, const TransformerConfig& c, const Workload& w, const Dims& k) {
  switch (s.cls) {
    case OpClass::Embedding: return k.s * k.d;
    case OpClass::LayerNorm: return 5 * k.s * k.d;
    case OpClass::Linear: {
      auto [in, out] = linear_dims(s, c);
      return k.s * in * out;
    }
    case OpClass::Adapter:
      if (s.name.ends_with(".prefix")) return 2 * k.p * k.d;
      if (has_lora(w.tuning, s.layer, linear_kind(s))) {
        auto [in, out] = linear_dims(s, c);
        return k.s * static_cast<double>(w.tuning.lora_rank) * (in + out);
      }
      return 0;
    case OpClass::Scores: return k.s * k.n * k.d;
    case OpClass::Softmax: return 5 * k.h * k.s * k.n;
    case OpClass::AttnValue: return k.s * k.n * k.d;
    case OpClass::Activation: return 8 * k.s * k.ff;
    case OpClass::Residual: return k.s * k.d;
    case OpClass::Pool: return k.s * k.d;
    case OpClass::Head: return k.d * k.c;
    case OpClass::Loss: return 5 * k.c;
  }
  return 0;
}

/// Masked payload bytes of one offloaded site for one pass, both ways.
double offload_bytes(const Site& s, const TransformerConfig& c, const Dims& k, bool backward) {
  if (s.cls == OpClass::Scores) {
    const double scores = k.h * k.s * k.n;
    if (!backward) return 8 * (k.s * k.d + k.d * k.n + scores);
    return 8 * (scores + k.n * k.d + k.s * k.d + k.s * k.d + k.n * k.d);
  }
  auto [in, out] = linear_dims(s, c);
  return 8 * k.s * (in + out);
}

}  // namespace

CostReport simulate_cost(const PartitionPlan& plan, const TransformerConfig& config,
                         const Workload& workload, const CostModel& model) {
  config.validate();
  model.validate();
  if (workload.seq_len == 0 || workload.seq_len > config.max_seq) {
    throw ContractError("workload sequence length outside [1, max_seq]");
  }
  const TuningConfig& t = workload.tuning;
  const Dims k{static_cast<double>(workload.seq_len),
               static_cast<double>(workload.seq_len +
                                   (t.mode == TuningMode::PtuningV2 ? t.prefix_len : 0)),
               static_cast<double>(config.d_model),
               static_cast<double>(config.n_heads),
               static_cast<double>(config.d_ff),
               static_cast<double>(config.n_classes),
               static_cast<double>(t.mode == TuningMode::PtuningV2 ? t.prefix_len : 0)};

  std::size_t grad_start = config.n_layers;
  if (t.mode == TuningMode::PtuningV2) grad_start = 0;
  if (t.mode == TuningMode::Lora || t.mode == TuningMode::Spf) grad_start = t.first_layer;
  if (plan.method() == Method::Method2) grad_start = std::max(grad_start, plan.split_layer());

  CostReport r;
  r.method = plan.method();
  double masked_bytes = 0;
  for (const Site& s : plan.sites()) {
    const double fwd = site_work(s, config, workload, k);
    const double bwd = workload.training ? backward_passes(s, t, grad_start) : 0.0;
    const bool reached = bwd > 0;
    const double unit = fwd * (1.0 + bwd) * model.weight(s.cls, s.domain);
    (s.domain == TrustDomain::Trusted ? r.trusted_compute : r.untrusted_compute) += unit;
    if (s.masked_offload) {
      r.offline_compute += fwd * (1.0 + bwd) * model.offline;
      r.crossings += reached ? 4 : 2;
      masked_bytes += offload_bytes(s, config, k, false);
      if (reached) masked_bytes += offload_bytes(s, config, k, true);
    }
  }
  if (plan.method() == Method::Method2) {
    // Split activations up; predictions come back when serving.
    r.crossings += workload.training ? 1 : 2;
    masked_bytes += 8 * k.s * k.d + (workload.training ? 0 : 8 * k.c);
  }
  r.masked_bytes = static_cast<std::uint64_t>(masked_bytes);
  r.crossing_cost = static_cast<double>(r.crossings) * model.crossing;
  r.masked_byte_cost = masked_bytes * model.masked_byte;
  r.total = r.trusted_compute + r.untrusted_compute + r.offline_compute + r.crossing_cost +
            r.masked_byte_cost;
  return r;
}

}  // namespace slicefl
