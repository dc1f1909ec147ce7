// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/partition.hpp"

#include <algorithm>

#include "slicefl/errors.hpp"

namespace slicefl {

std::string_view to_string(TrustDomain d) {
  return d == TrustDomain::Trusted ? "trusted" : "untrusted";
}

std::string_view to_string(DataState s) {
  return s == DataState::Plaintext ? "plaintext" : "masked";
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Method1: return "method1";
    case Method::Method2: return "method2";
    case Method::Swmt: return "swmt";
    case Method::Plaintext: return "fl-llm";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "method1") return Method::Method1;
  if (text == "method2") return Method::Method2;
  if (text == "swmt") return Method::Swmt;
  if (text == "fl-llm" || text == "plaintext") return Method::Plaintext;
  throw ContractError("unknown method: " + std::string(text));
}

PartitionPlan::PartitionPlan(Method method, std::size_t split_layer, std::vector<Site> sites)
    : method_(method), split_layer_(split_layer), sites_(std::move(sites)) {
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (!index_.emplace(sites_[i].name, i).second) {
      throw ContractError("duplicate plan site " + sites_[i].name);
    }
  }
}

const Site& PartitionPlan::site(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("site '" + std::string(name) + "' is not in the plan");
  return sites_[it->second];
}

bool PartitionPlan::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

std::size_t PartitionPlan::count(TrustDomain d) const {
  return static_cast<std::size_t>(
      std::count_if(sites_.begin(), sites_.end(), [d](const Site& s) { return s.domain == d; }));
}

std::size_t PartitionPlan::count_offloaded() const {
  return static_cast<std::size_t>(
      std::count_if(sites_.begin(), sites_.end(), [](const Site& s) { return s.masked_offload; }));
}

namespace {

std::vector<Site> enumerate_sites(const TransformerConfig& config) {
  std::vector<Site> sites;
  auto add = [&](std::string name, std::size_t layer, OpClass cls) {
    Site s;
    s.name = std::move(name);
    s.layer = layer;
    s.cls = cls;
    sites.push_back(std::move(s));
  };
  add("embed", Site::kNoLayer, OpClass::Embedding);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    add(site_name(l, "ln1"), l, OpClass::LayerNorm);
    add(site_name(l, "qkv"), l, OpClass::Linear);
    add(site_name(l, "qkv.lora"), l, OpClass::Adapter);
    add(site_name(l, "prefix"), l, OpClass::Adapter);
    add(site_name(l, "scores"), l, OpClass::Scores);
    add(site_name(l, "softmax"), l, OpClass::Softmax);
    add(site_name(l, "attn_value"), l, OpClass::AttnValue);
    add(site_name(l, "dense"), l, OpClass::Linear);
    add(site_name(l, "dense.lora"), l, OpClass::Adapter);
    add(site_name(l, "residual1"), l, OpClass::Residual);
    add(site_name(l, "ln2"), l, OpClass::LayerNorm);
    add(site_name(l, "fc1"), l, OpClass::Linear);
    add(site_name(l, "fc1.lora"), l, OpClass::Adapter);
    add(site_name(l, "gelu"), l, OpClass::Activation);
    add(site_name(l, "fc2"), l, OpClass::Linear);
    add(site_name(l, "fc2.lora"), l, OpClass::Adapter);
    add(site_name(l, "residual2"), l, OpClass::Residual);
  }
  add("final_ln", Site::kNoLayer, OpClass::LayerNorm);
  add("pool", Site::kNoLayer, OpClass::Pool);
  add("head", Site::kNoLayer, OpClass::Head);
  add("loss", Site::kNoLayer, OpClass::Loss);
  return sites;
}

}  // namespace

PartitionPlan build_plan(const TransformerConfig& config, Method method, std::size_t split_layer) {
  config.validate();
  std::vector<Site> sites = enumerate_sites(config);
  switch (method) {
    case Method::Method1:
      split_layer = 0;
      for (Site& s : sites) {
        const bool linear_algebra = s.cls == OpClass::Linear || s.cls == OpClass::Scores;
        s.domain = linear_algebra ? TrustDomain::Untrusted : TrustDomain::Trusted;
        s.masked_offload = linear_algebra;
      }
      break;
    case Method::Method2:
      if (split_layer >= config.n_layers) {
        throw ContractError("split layer " + std::to_string(split_layer) +
                            " must be below n_layers " + std::to_string(config.n_layers));
      }
      for (Site& s : sites) {
        const bool client = s.cls == OpClass::Embedding ||
                            (s.layer != Site::kNoLayer && s.layer < split_layer);
        s.domain = client ? TrustDomain::Untrusted : TrustDomain::Trusted;
        s.role = client ? Role::Client : Role::Server;
        s.owner_local = client;
      }
      break;
    case Method::Swmt:
      split_layer = 0;
      for (Site& s : sites) s.domain = TrustDomain::Trusted;
      break;
    case Method::Plaintext:
      split_layer = 0;
      for (Site& s : sites) s.domain = TrustDomain::Untrusted;
      break;
  }
  return PartitionPlan(method, split_layer, std::move(sites));
}

}  // namespace slicefl
