// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicefl/config.hpp"
#include "slicefl/orchestrator.hpp"

namespace slicefl {

/// "pass" or "fail" for secure runs, "n/a-plaintext" for FL-LLM.
std::string audit_status(Method method, const AuditReport& audit);

/// report.json: the training report with its experiment config embedded.
nlohmann::json run_document(const ExperimentConfig& config, const TrainingReport& report);

/// Writes report.json, audit.json, cost.json, table.csv and the final
/// adapters (adapters.bin with its adapters.json manifest) into `dir`,
/// plus trace.jsonl when the report carries trace events.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const TrainingReport& report);

/// One row of a comparison table; every cell is copied from a report.
struct CompareRow {
  std::string label;
  std::string method;
  std::string tuning;
  std::size_t split_layer = 0;
  double accuracy = 0;
  std::size_t trainable_params = 0;
  double cost = 0;
  std::string audit;
};

/// Rows from run documents. Documents must agree on model dims and task;
/// otherwise ContractError.
std::vector<CompareRow> compare(const std::vector<nlohmann::json>& documents);

std::string format_table(const std::vector<CompareRow>& rows);
std::string table_csv(const std::vector<CompareRow>& rows);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace slicefl
