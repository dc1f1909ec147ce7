// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "slicefl/errors.hpp"

namespace slicefl {

namespace pt = boost::property_tree;

void ExperimentConfig::finalize() {
  task.vocab = fed.model.vocab;
  task.n_classes = fed.model.n_classes;
  fed.model.validate();
  task.validate();
  if (task.seq_len > fed.model.max_seq) {
    throw ContractError("data seq_len exceeds model max_seq");
  }
  fed.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = fed.to_json();
  j["task"] = task.to_json();
  return j;
}

std::pair<double, double> spf_ratio_preset(std::string_view name) {
  if (name == "narrow") return {0.125, 0.25};
  if (name == "wide") return {0.5, 0.625};
  if (name == "default") return {0.25, 0.5};
  throw ContractError("unknown SPF ratio preset: " + std::string(name));
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"experiment",
       {"method", "tuning", "clients", "rounds", "local_steps", "batch_size", "lr", "seed",
        "precision", "server_steps", "keep_trace"}},
      {"model",
       {"n_layers", "d_model", "n_heads", "d_head", "d_ff", "vocab", "n_classes", "max_seq"}},
      {"lora", {"rank", "alpha", "dropout", "targets", "first_layer"}},
      {"prefix", {"length"}},
      {"split", {"layer", "qkv_ratio", "dense_ratio", "preset"}},
      {"mask", {"distribution", "scale", "wire_scale"}},
      {"data", {"n_train", "n_test", "seq_len", "separation"}},
      {"cost", {"trusted", "untrusted", "crossing", "masked_byte", "offline"}},
  };
  return s;
}

OpClass parse_op_class(std::string_view text) {
  for (OpClass c : {OpClass::Embedding, OpClass::LayerNorm, OpClass::Linear, OpClass::Scores,
                    OpClass::Softmax, OpClass::AttnValue, OpClass::Activation, OpClass::Residual,
                    OpClass::Adapter, OpClass::Pool, OpClass::Head, OpClass::Loss}) {
    if (to_string(c) == text) return c;
  }
  throw ContractError("unknown op class in [cost]: " + std::string(text));
}

template <typename T>
T parse_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  T out{};
  in >> std::boolalpha >> out;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw FormatError("bad value '" + text + "' for key '" + key + "'");
  }
  return out;
}

template <typename T>
T get(const pt::ptree& section, const std::string& key, T fallback) {
  auto v = section.get_optional<std::string>(key);
  return v ? parse_value<T>(*v, key) : fallback;
}

std::string get_str(const pt::ptree& section, const std::string& key, std::string fallback) {
  return section.get<std::string>(key, std::move(fallback));
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  pt::ptree root;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  for (const auto& [name, section] : root) {
    auto it = schema().find(name);
    if (it == schema().end()) throw ContractError("unknown config section [" + name + "]");
    for (const auto& [key, value] : section) {
      const bool per_class = name == "cost" && (key.starts_with("trusted.") ||
                                                key.starts_with("untrusted."));
      if (!per_class && !it->second.count(key)) {
        throw ContractError("unknown key '" + key + "' in [" + name + "]");
      }
    }
  }
  const pt::ptree empty;
  auto section = [&](const char* name) -> const pt::ptree& {
    auto c = root.get_child_optional(name);
    return c ? *c : empty;
  };

  ExperimentConfig cfg;
  FedConfig& f = cfg.fed;
  const pt::ptree& ex = section("experiment");
  f.method = parse_method(get_str(ex, "method", "method1"));
  f.tuning.mode = parse_tuning_mode(get_str(ex, "tuning", "lora"));
  cfg.task.clients = get(ex, "clients", cfg.task.clients);
  f.rounds = get(ex, "rounds", f.rounds);
  f.local_steps = get(ex, "local_steps", f.local_steps);
  f.batch_size = get(ex, "batch_size", f.batch_size);
  f.lr = get(ex, "lr", f.lr);
  f.seed = get(ex, "seed", f.seed);
  f.precision = parse_precision(get_str(ex, "precision", "exact"));
  f.server_steps = get(ex, "server_steps", f.server_steps);
  f.keep_trace = get(ex, "keep_trace", f.keep_trace);

  const pt::ptree& m = section("model");
  f.model.n_layers = get(m, "n_layers", f.model.n_layers);
  f.model.d_model = get(m, "d_model", f.model.d_model);
  f.model.n_heads = get(m, "n_heads", f.model.n_heads);
  f.model.d_head = get(m, "d_head", f.model.d_head);
  f.model.d_ff = get(m, "d_ff", f.model.d_ff);
  f.model.vocab = get(m, "vocab", f.model.vocab);
  f.model.n_classes = get(m, "n_classes", f.model.n_classes);
  f.model.max_seq = get(m, "max_seq", f.model.max_seq);

  const pt::ptree& lora = section("lora");
  f.tuning.lora_rank = get(lora, "rank", f.tuning.lora_rank);
  f.tuning.lora_alpha = get(lora, "alpha", f.tuning.lora_alpha);
  f.tuning.lora_dropout = get(lora, "dropout", f.tuning.lora_dropout);
  f.tuning.first_layer = get(lora, "first_layer", f.tuning.first_layer);
  if (auto targets = lora.get_optional<std::string>("targets")) {
    f.tuning.lora_targets.clear();
    std::istringstream in(*targets);
    std::string item;
    while (std::getline(in, item, ',')) {
      item.erase(0, item.find_first_not_of(' '));
      item.erase(item.find_last_not_of(' ') + 1);
      if (!item.empty()) f.tuning.lora_targets.push_back(parse_linear_kind(item));
    }
  }
  f.tuning.prefix_len = get(section("prefix"), "length", f.tuning.prefix_len);

  const pt::ptree& split = section("split");
  f.split_layer = get(split, "layer", f.split_layer);
  if (auto preset = split.get_optional<std::string>("preset")) {
    std::tie(f.tuning.qkv_ratio, f.tuning.dense_ratio) = spf_ratio_preset(*preset);
  }
  f.tuning.qkv_ratio = get(split, "qkv_ratio", f.tuning.qkv_ratio);
  f.tuning.dense_ratio = get(split, "dense_ratio", f.tuning.dense_ratio);

  const pt::ptree& mask = section("mask");
  const std::string dist = get_str(mask, "distribution", "uniform");
  if (dist == "uniform") {
    f.mask.kind = MaskDistribution::Kind::Uniform;
  } else if (dist == "gaussian") {
    f.mask.kind = MaskDistribution::Kind::Gaussian;
  } else {
    throw ContractError("unknown mask distribution: " + dist);
  }
  f.mask.scale = get(mask, "scale", f.mask.scale);
  f.wire_scale = get(mask, "wire_scale", f.wire_scale);

  const pt::ptree& data = section("data");
  cfg.task.n_train = get(data, "n_train", cfg.task.n_train);
  cfg.task.n_test = get(data, "n_test", cfg.task.n_test);
  cfg.task.seq_len = get(data, "seq_len", cfg.task.seq_len);
  cfg.task.separation = get(data, "separation", cfg.task.separation);

  const pt::ptree& cost = section("cost");
  f.cost.trusted_default = get(cost, "trusted", f.cost.trusted_default);
  f.cost.untrusted_default = get(cost, "untrusted", f.cost.untrusted_default);
  f.cost.crossing = get(cost, "crossing", f.cost.crossing);
  f.cost.masked_byte = get(cost, "masked_byte", f.cost.masked_byte);
  f.cost.offline = get(cost, "offline", f.cost.offline);
  for (const auto& [key, value] : cost) {
    const std::size_t dot = key.find('.');
    if (dot == std::string::npos) continue;
    const OpClass cls = parse_op_class(key.substr(dot + 1));
    const double w = parse_value<double>(value.data(), key);
    (key.starts_with("trusted.") ? f.cost.trusted : f.cost.untrusted)[cls] = w;
  }

  cfg.finalize();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

}  // namespace slicefl
