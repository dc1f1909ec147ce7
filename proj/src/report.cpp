// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "slicefl/checkpoint.hpp"
#include "slicefl/errors.hpp"

namespace slicefl {

std::string audit_status(Method method, const AuditReport& audit) {
  if (method == Method::Plaintext) return "n/a-plaintext";
  return audit.pass ? "pass" : "fail";
}

nlohmann::json run_document(const ExperimentConfig& config, const TrainingReport& report) {
  nlohmann::json doc = report.to_json();
  doc["config"] = config.to_json();
  doc["audit_status"] = audit_status(report.method, report.audit);
  return doc;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const TrainingReport& report) {
  std::filesystem::create_directories(dir);
  const nlohmann::json doc = run_document(config, report);
  write_text(dir / "report.json", doc.dump(2) + "\n");
  nlohmann::json audit = report.audit.to_json();
  audit["status"] = doc["audit_status"];
  audit["pads"] = report.pads;
  write_text(dir / "audit.json", audit.dump(2) + "\n");
  nlohmann::json cost = report.cost.to_json();
  cost["weights"] = config.fed.cost.to_json();
  write_text(dir / "cost.json", cost.dump(2) + "\n");
  write_text(dir / "table.csv", table_csv(compare({doc})));
  if (!report.final_params.empty()) save_checkpoint(dir, "adapters", report.final_params);
  if (!report.trace_events.empty()) {
    std::ostringstream os;
    for (const TraceEvent& ev : report.trace_events) os << ev.to_json().dump() << '\n';
    write_text(dir / "trace.jsonl", os.str());
  }
}

std::vector<CompareRow> compare(const std::vector<nlohmann::json>& documents) {
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    const nlohmann::json& d = documents[i];
    try {
      const nlohmann::json& c = d.at("config");
      if (i > 0) {
        const nlohmann::json& c0 = documents[0].at("config");
        if (c.at("model") != c0.at("model") || c.at("task") != c0.at("task")) {
          throw ContractError("run " + std::to_string(i) +
                              " uses a different model or task than run 0");
        }
      }
      CompareRow r;
      r.method = d.at("method").get<std::string>();
      r.tuning = d.at("tuning").get<std::string>();
      r.split_layer = c.at("split_layer").get<std::size_t>();
      r.label = r.method == "method2" ? r.method + "@L" + std::to_string(r.split_layer)
                                      : r.method + "/" + r.tuning;
      r.accuracy = d.at("eval").at("accuracy").get<double>();
      r.trainable_params = d.at("trainable_params").get<std::size_t>();
      r.cost = d.at("cost").at("total").get<double>();
      r.audit = d.at("audit_status").get<std::string>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("run document " + std::to_string(i) + ": " + e.what());
    }
  }
  return rows;
}

std::string format_table(const std::vector<CompareRow>& rows) {
  const std::vector<std::string> head = {"run", "accuracy", "trainable_params", "cost", "audit"};
  std::vector<std::vector<std::string>> cells;
  for (const CompareRow& r : rows) {
    std::ostringstream acc, cost;
    acc << std::fixed << std::setprecision(4) << r.accuracy;
    cost << std::scientific << std::setprecision(4) << r.cost;
    cells.push_back({r.label, acc.str(), std::to_string(r.trainable_params), cost.str(), r.audit});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t j = 0; j < head.size(); ++j) {
    width[j] = head[j].size();
    for (const auto& row : cells) width[j] = std::max(width[j], row[j].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      os << (j ? "  " : "") << (j == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[j]))
         << row[j];
    }
    os << '\n';
  };
  line(head);
  for (const auto& row : cells) line(row);
  return os.str();
}

std::string table_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "run,method,tuning,split_layer,accuracy,trainable_params,cost,audit\n";
  os << std::setprecision(17);
  for (const CompareRow& r : rows) {
    os << r.label << ',' << r.method << ',' << r.tuning << ',' << r.split_layer << ','
       << r.accuracy << ',' << r.trainable_params << ',' << r.cost << ',' << r.audit << '\n';
  }
  return os.str();
}

}  // namespace slicefl
