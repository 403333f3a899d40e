// SPDX-License-Identifier: Apache-2.0
//
// rollmini CLI: run / resume / report / validate-config / gen-dataset.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rollmini/checkpoint.hpp"
#include "rollmini/config.hpp"
#include "rollmini/dataset.hpp"
#include "rollmini/errors.hpp"
#include "rollmini/log.hpp"
#include "rollmini/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rollmini;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string resume_path;
  std::string output_dir;
  int64_t seed = -1;
  int64_t steps = -1;
};

RunConfig load_with_overrides(const CommonOpts& opts) {
  RunConfig cfg = load_run_config(opts.config_path);
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (opts.seed >= 0) cfg.seed = static_cast<uint64_t>(opts.seed);
  if (opts.steps >= 0) cfg.total_steps = static_cast<int>(opts.steps);
  cfg.validate();
  return cfg;
}

int finish(const RunResult& result) {
  if (result.halted_early) {
    std::cerr << "run halted after step " << result.last_step << ": " << result.halt_reason << "\n"
              << "resume from the checkpoint written at that step\n";
    return 3;
  }
  std::cout << "completed " << result.last_step << " steps\n";
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    std::cout << "final metrics: " << last.to_json() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rollmini: desk-scale multi-model RL training orchestrator"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* run_cmd = app.add_subcommand("run", "Execute a pipeline from a config file");
  run_cmd->add_option("--config", opts.config_path, "Run config (TOML)")->required();
  run_cmd->add_option("--output-dir", opts.output_dir, "Override run.output_dir");
  run_cmd->add_option("--seed", opts.seed, "Override run.seed");
  run_cmd->add_option("--steps", opts.steps, "Override run.total_steps");

  auto* resume_cmd = app.add_subcommand("resume", "Continue a run from a checkpoint");
  resume_cmd->add_option("--config", opts.config_path, "Run config (TOML)")->required();
  resume_cmd->add_option("--resume", opts.resume_path, "Checkpoint file")->required();
  resume_cmd->add_option("--output-dir", opts.output_dir, "Override run.output_dir");
  resume_cmd->add_option("--steps", opts.steps, "Override run.total_steps");

  std::string report_input;
  std::string report_csv;
  auto* report_cmd = app.add_subcommand("report", "Summarize a metrics.jsonl file");
  report_cmd->add_option("input", report_input, "metrics.jsonl path or run directory")->required();
  report_cmd->add_option("--csv", report_csv, "Write plot-ready CSV to this path");

  auto* validate_cmd = app.add_subcommand("validate-config", "Check a config and print the placement report");
  validate_cmd->add_option("--config", opts.config_path, "Run config (TOML)")->required();

  std::string dataset_dir = "datasets";
  int64_t dataset_seed = 0;
  int64_t code_count = 200;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Write the toy RLVR datasets");
  gen_cmd->add_option("--output-dir", dataset_dir, "Directory for the jsonl files");
  gen_cmd->add_option("--seed", dataset_seed, "Generator seed");
  gen_cmd->add_option("--code-count", code_count, "Number of code tasks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return finish(run_pipeline(load_with_overrides(opts)));
    }
    if (resume_cmd->parsed()) {
      return finish(resume_pipeline(load_with_overrides(opts), opts.resume_path));
    }
    if (report_cmd->parsed()) {
      std::string path = report_input;
      if (fs::is_directory(path)) path += "/metrics.jsonl";
      const auto records = load_metrics_jsonl(path);
      std::cout << summarize_metrics(records).to_table();
      if (!report_csv.empty()) {
        std::ofstream os(report_csv, std::ios::trunc);
        if (!os) throw ConfigError("report: cannot write '" + report_csv + "'");
        os << metrics_to_csv(records);
        std::cout << "csv written to " << report_csv << "\n";
      }
      return 0;
    }
    if (validate_cmd->parsed()) {
      RunConfig cfg = load_run_config(opts.config_path);
      ResourcePool pool(cfg.device_specs());
      BindingPlan plan = pool.bind_roles(cfg.device_mapping(), cfg.role_worlds());
      ColocationReport report = colocation_report(pool, plan);
      std::cout << report.to_table();
      std::cout << report.to_json() << "\n";
      std::cout << "config ok (hash " << cfg.config_hash() << ")\n";
      return 0;
    }
    if (gen_cmd->parsed()) {
      fs::create_directories(dataset_dir);
      write_task_jsonl(dataset_dir + "/addition.jsonl", gen_addition_dataset());
      write_task_jsonl(dataset_dir + "/code.jsonl",
                       gen_code_dataset(static_cast<size_t>(code_count),
                                        static_cast<uint64_t>(dataset_seed)));
      write_task_jsonl(dataset_dir + "/general.jsonl", gen_general_dataset());
      std::cout << "datasets written to " << dataset_dir << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
