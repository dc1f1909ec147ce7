// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "slicefl/dataset.hpp"
#include "slicefl/orchestrator.hpp"

namespace slicefl {

/// A complete experiment: the federated run plus the synthetic task it
/// trains on. The task's vocab and class count always follow the model.
struct ExperimentConfig {
  FedConfig fed;
  TaskSpec task;

  /// Aligns the task with the model and validates both.
  void finalize();
  nlohmann::json to_json() const;
};

/// Named SPF ratio pairs (qkv, dense): "narrow" 12.5%/25%, "wide"
/// 50%/62.5%, "default" 25%/50%.
std::pair<double, double> spf_ratio_preset(std::string_view name);

/// Parses the INI schema documented in the README. Unknown sections or
/// keys raise ContractError; malformed values raise FormatError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace slicefl
