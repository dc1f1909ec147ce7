// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace slicefl {

struct Example {
  std::vector<std::uint32_t> tokens;
  std::uint32_t label = 0;

  bool operator==(const Example&) const = default;
};
using Dataset = std::vector<Example>;

/// Synthetic sequence classification. Class c owns the signature tokens
/// [c*m, (c+1)*m) with m = vocab / (2 * n_classes); each position is drawn
/// from the class signature with probability `separation` and uniformly
/// from the whole vocabulary otherwise.
struct TaskSpec {
  std::size_t n_classes = 4;
  std::size_t seq_len = 16;
  std::size_t vocab = 32;
  std::size_t n_train = 480;
  std::size_t n_test = 240;
  std::size_t clients = 3;
  double separation = 0.5;

  /// Throws ContractError on an unusable spec.
  void validate() const;
  nlohmann::json to_json() const;
  static TaskSpec from_json(const nlohmann::json& j);
  bool operator==(const TaskSpec&) const = default;
};

struct FederatedData {
  std::vector<Dataset> shards;  // one per client, disjoint
  Dataset test;

  std::size_t total_train() const;
  Dataset pooled() const;
};

/// Deterministic in (spec, seed). Shards are equal parts of the training
/// set; the first n_train % clients shards get one extra example.
FederatedData gen_dataset(const TaskSpec& spec, std::uint64_t seed);

std::vector<Dataset> split_shards(const Dataset& data, std::size_t parts);

/// "label,tokens" rows with space-separated token ids.
std::string to_csv(const Dataset& data);
Dataset parse_csv(std::string_view text);

/// Writes task.json, shard_<k>.csv (k from 1) and test.csv into `dir`.
void write_dataset(const std::filesystem::path& dir, const TaskSpec& spec,
                   std::uint64_t seed, const FederatedData& data);
FederatedData read_dataset(const std::filesystem::path& dir);

}  // namespace slicefl
