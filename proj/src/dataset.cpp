// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "slicefl/errors.hpp"
#include "slicefl/rng.hpp"

namespace slicefl {

void TaskSpec::validate() const {
  if (n_classes < 2) throw ContractError("task needs at least 2 classes");
  if (vocab < 2 * n_classes) throw ContractError("vocab must be at least 2 * n_classes");
  if (seq_len == 0) throw ContractError("seq_len must be >= 1");
  if (clients == 0) throw ContractError("need at least one client");
  if (n_train < clients) throw ContractError("every client needs at least one example");
  if (!(separation >= 0.0 && separation <= 1.0)) {
    throw ContractError("separation must lie in [0, 1]");
  }
}

nlohmann::json TaskSpec::to_json() const {
  return {{"n_classes", n_classes}, {"seq_len", seq_len}, {"vocab", vocab},
          {"n_train", n_train},     {"n_test", n_test},   {"clients", clients},
          {"separation", separation}};
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
  TaskSpec s;
  s.n_classes = j.at("n_classes").get<std::size_t>();
  s.seq_len = j.at("seq_len").get<std::size_t>();
  s.vocab = j.at("vocab").get<std::size_t>();
  s.n_train = j.at("n_train").get<std::size_t>();
  s.n_test = j.at("n_test").get<std::size_t>();
  s.clients = j.at("clients").get<std::size_t>();
  s.separation = j.at("separation").get<double>();
  return s;
}

std::size_t FederatedData::total_train() const {
  std::size_t n = 0;
  for (const Dataset& d : shards) n += d.size();
  return n;
}

Dataset FederatedData::pooled() const {
  Dataset out;
  for (const Dataset& d : shards) out.insert(out.end(), d.begin(), d.end());
  return out;
}

namespace {

Dataset sample(const TaskSpec& spec, std::size_t n, Rng& rng) {
  const std::size_t m = spec.vocab / (2 * spec.n_classes);
  Dataset out(n);
  for (Example& ex : out) {
    ex.label = static_cast<std::uint32_t>(rng.below(spec.n_classes));
    ex.tokens.resize(spec.seq_len);
    for (std::uint32_t& tok : ex.tokens) {
      const bool signal = rng.uniform() < spec.separation;
      tok = static_cast<std::uint32_t>(signal ? ex.label * m + rng.below(m)
                                              : rng.below(spec.vocab));
    }
  }
  return out;
}

}  // namespace

FederatedData gen_dataset(const TaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng train_rng(seed, stream_id("data.train"));
  Rng test_rng(seed, stream_id("data.test"));
  FederatedData out;
  out.shards = split_shards(sample(spec, spec.n_train, train_rng), spec.clients);
  out.test = sample(spec, spec.n_test, test_rng);
  return out;
}

std::vector<Dataset> split_shards(const Dataset& data, std::size_t parts) {
  if (parts == 0 || data.size() < parts) {
    throw ContractError("cannot split " + std::to_string(data.size()) + " examples into " +
                        std::to_string(parts) + " non-empty shards");
  }
  std::vector<Dataset> out(parts);
  const std::size_t base = data.size() / parts, extra = data.size() % parts;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < parts; ++k) {
    const std::size_t n = base + (k < extra ? 1 : 0);
    out[k].assign(data.begin() + static_cast<std::ptrdiff_t>(pos),
                  data.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return out;
}

std::string to_csv(const Dataset& data) {
  std::ostringstream os;
  os << "label,tokens\n";
  for (const Example& ex : data) {
    os << ex.label << ',';
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) os << (i ? " " : "") << ex.tokens[i];
    os << '\n';
  }
  return os.str();
}

namespace {

std::uint32_t parse_u32(std::string_view s, std::size_t line) {
  std::uint32_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw FormatError("bad integer '" + std::string(s) + "' on line " + std::to_string(line));
  }
  return v;
}

}  // namespace

Dataset parse_csv(std::string_view text) {
  Dataset out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != "label,tokens") throw FormatError("missing 'label,tokens' header");
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw FormatError("missing comma on line " + std::to_string(line_no));
    }
    Example ex;
    ex.label = parse_u32(line.substr(0, comma), line_no);
    std::string_view toks = line.substr(comma + 1);
    while (!toks.empty()) {
      const std::size_t sp = toks.find(' ');
      ex.tokens.push_back(parse_u32(toks.substr(0, sp), line_no));
      toks = sp == std::string_view::npos ? std::string_view{} : toks.substr(sp + 1);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const TaskSpec& spec, std::uint64_t seed,
                   const FederatedData& data) {
  std::filesystem::create_directories(dir);
  nlohmann::json task = spec.to_json();
  task["seed"] = seed;
  write_text(dir / "task.json", task.dump(2) + "\n");
  for (std::size_t k = 0; k < data.shards.size(); ++k) {
    write_text(dir / ("shard_" + std::to_string(k + 1) + ".csv"), to_csv(data.shards[k]));
  }
  write_text(dir / "test.csv", to_csv(data.test));
}

FederatedData read_dataset(const std::filesystem::path& dir) {
  const TaskSpec spec = TaskSpec::from_json(nlohmann::json::parse(read_text(dir / "task.json")));
  FederatedData out;
  for (std::size_t k = 1; k <= spec.clients; ++k) {
    out.shards.push_back(parse_csv(read_text(dir / ("shard_" + std::to_string(k) + ".csv"))));
  }
  out.test = parse_csv(read_text(dir / "test.csv"));
  return out;
}

}  // namespace slicefl
