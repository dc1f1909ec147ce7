// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: dataset generation, single runs, method comparison,
// taint audits and cost-model benchmarks.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slicefl/config.hpp"
#include "slicefl/cost.hpp"
#include "slicefl/dataset.hpp"
#include "slicefl/errors.hpp"
#include "slicefl/orchestrator.hpp"
#include "slicefl/report.hpp"

namespace fs = std::filesystem;
using namespace slicefl;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string method;
  std::string tuning;
  std::string precision;
  std::string out = "out";
  std::string data;
  bool trace = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_method) {
  cmd->add_option("--config", f.config, "INI experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Seed for data, model and training");
  if (with_method) {
    cmd->add_option("--method", f.method, "method1 | method2 | fl-llm | swmt")
        ->check(CLI::IsMember({"method1", "method2", "fl-llm", "swmt"}));
  }
  cmd->add_option("--tuning", f.tuning, "lora | ptuningv2")
      ->check(CLI::IsMember({"lora", "ptuningv2"}));
  cmd->add_option("--precision", f.precision, "exact | simhalf")
      ->check(CLI::IsMember({"exact", "simhalf"}));
  cmd->add_option("--out", f.out, "Output directory");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? parse_config("") : load_config(f.config);
  if (f.seed) cfg.fed.seed = *f.seed;
  if (!f.method.empty()) cfg.fed.method = parse_method(f.method);
  if (!f.tuning.empty()) cfg.fed.tuning.mode = parse_tuning_mode(f.tuning);
  if (!f.precision.empty()) cfg.fed.precision = parse_precision(f.precision);
  if (f.trace) cfg.fed.keep_trace = true;
  cfg.finalize();
  return cfg;
}

FederatedData load_or_generate(const CommonFlags& f, const ExperimentConfig& cfg) {
  if (!f.data.empty()) return read_dataset(f.data);
  return gen_dataset(cfg.task, cfg.fed.seed);
}

int cmd_gen_data(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve(f);
  const FederatedData data = gen_dataset(cfg.task, cfg.fed.seed);
  write_dataset(f.out, cfg.task, cfg.fed.seed, data);
  std::cout << "wrote " << data.total_train() << " training examples in " << data.shards.size()
            << " shards and " << data.test.size() << " test examples to " << f.out << "\n";
  return 0;
}

int cmd_run(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve(f);
  const FederatedData data = load_or_generate(f, cfg);
  const TrainingReport report = run(cfg.fed, data);
  write_run_outputs(f.out, cfg, report);
  std::cout << format_table(compare({run_document(cfg, report)}));
  return 0;
}

int cmd_compare(const CommonFlags& f, const std::vector<std::string>& reports) {
  std::vector<nlohmann::json> docs;
  if (!reports.empty()) {
    for (const std::string& r : reports) {
      const fs::path p = fs::is_directory(r) ? fs::path(r) / "report.json" : fs::path(r);
      docs.push_back(read_json(p));
    }
  } else {
    const ExperimentConfig base = resolve(f);
    const FederatedData data = load_or_generate(f, base);
    for (Method m : {Method::Plaintext, Method::Method2, Method::Method1, Method::Swmt}) {
      ExperimentConfig cfg = base;
      cfg.fed.method = m;
      cfg.finalize();
      const TrainingReport report = run(cfg.fed, data);
      write_run_outputs(fs::path(f.out) / std::string(to_string(m)), cfg, report);
      docs.push_back(run_document(cfg, report));
    }
  }
  const std::vector<CompareRow> rows = compare(docs);
  fs::create_directories(f.out);
  write_text(fs::path(f.out) / "table.csv", table_csv(rows));
  std::cout << format_table(rows);
  return 0;
}

int cmd_audit(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve(f);
  const FederatedData data = load_or_generate(f, cfg);
  const TrainingReport report = run(cfg.fed, data);
  write_run_outputs(f.out, cfg, report);
  const std::string status = audit_status(report.method, report.audit);
  nlohmann::json j = report.audit.to_json();
  j["status"] = status;
  std::cout << j.dump(2) << "\n";
  return status == "fail" ? 2 : 0;
}

int cmd_bench(const CommonFlags& f, const std::vector<std::size_t>& seq_lens) {
  const ExperimentConfig cfg = resolve(f);
  nlohmann::json out = nlohmann::json::array();
  std::ostringstream csv;
  csv << "method,seq_len,phase,total,trusted,untrusted,crossings,masked_bytes\n";
  for (std::size_t s : seq_lens) {
    for (bool training : {true, false}) {
      for (Method m : {Method::Plaintext, Method::Method2, Method::Method1, Method::Swmt}) {
        Workload w;
        w.seq_len = s;
        w.training = training;
        w.tuning = cfg.fed.tuning;
        if (m == Method::Method2) {
          w.tuning.mode = TuningMode::Spf;
          w.tuning.first_layer = cfg.fed.split_layer;
        }
        const PartitionPlan plan = build_plan(cfg.fed.model, m, cfg.fed.split_layer);
        const CostReport r = simulate_cost(plan, cfg.fed.model, w, cfg.fed.cost);
        nlohmann::json j = r.to_json();
        j["seq_len"] = s;
        j["phase"] = training ? "train" : "infer";
        out.push_back(j);
        csv << to_string(m) << ',' << s << ',' << (training ? "train" : "infer") << ','
            << r.total << ',' << r.trusted_compute << ',' << r.untrusted_compute << ','
            << r.crossings << ',' << r.masked_bytes << '\n';
      }
    }
  }
  fs::create_directories(f.out);
  write_text(fs::path(f.out) / "cost.json", out.dump(2) + "\n");
  write_text(fs::path(f.out) / "table.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slicefl: federated fine-tuning with enclave-partitioned models"};
  app.require_subcommand(1);

  CommonFlags gen, run_f, cmp, aud, bench;
  std::vector<std::string> reports;
  std::vector<std::size_t> seq_lens = {4, 8, 16};

  add_common(app.add_subcommand("gen-data", "Write a synthetic federated dataset"), gen, false);
  CLI::App* run_cmd = app.add_subcommand("run", "Train one method and write its reports");
  add_common(run_cmd, run_f, true);
  run_cmd->add_option("--data", run_f.data, "Dataset directory from gen-data");
  run_cmd->add_flag("--trace", run_f.trace, "Also write trace.jsonl");
  CLI::App* cmp_cmd = app.add_subcommand("compare", "Compare methods on one task");
  add_common(cmp_cmd, cmp, false);
  cmp_cmd->add_option("--data", cmp.data, "Dataset directory from gen-data");
  cmp_cmd->add_option("reports", reports, "Existing run directories or report.json files");
  CLI::App* aud_cmd = app.add_subcommand("audit", "Run a method and check its taint audit");
  add_common(aud_cmd, aud, true);
  aud_cmd->add_option("--data", aud.data, "Dataset directory from gen-data");
  aud_cmd->add_flag("--trace", aud.trace, "Also write trace.jsonl");
  CLI::App* bench_cmd = app.add_subcommand("bench", "Tabulate the simulated cost model");
  add_common(bench_cmd, bench, false);
  bench_cmd->add_option("--seq-len", seq_lens, "Sequence lengths to price");

  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand("gen-data")) return cmd_gen_data(gen);
    if (app.got_subcommand("run")) return cmd_run(run_f);
    if (app.got_subcommand("compare")) return cmd_compare(cmp, reports);
    if (app.got_subcommand("audit")) return cmd_audit(aud);
    if (app.got_subcommand("bench")) return cmd_bench(bench, seq_lens);
  } catch (const slicefl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
