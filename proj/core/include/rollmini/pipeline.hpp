// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rollmini/checkpoint.hpp"
#include "rollmini/cluster.hpp"
#include "rollmini/config.hpp"
#include "rollmini/dataset.hpp"
#include "rollmini/sim_clock.hpp"

namespace rollmini {

struct MetricsRecord {
  int step = 0;
  double success_rate = 0.0;
  double effective_action_rate = 0.0;
  double avg_steps = 0.0;
  double mean_reward = 0.0;
  double accuracy = 0.0;  // rlvr: mean over the step's completed samples
  std::map<std::string, double> domain_accuracy;
  double loss = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double mean_kl = 0.0;
  uint64_t tokens_generated = 0;
  uint64_t tokens_wasted_aborted = 0;
  uint64_t wall_ticks = 0;
  std::optional<double> val_success_rate;
  std::optional<double> val_effective_rate;
  std::optional<double> val_accuracy;

  std::string to_json() const;  // one JSONL line
  static MetricsRecord from_json(const std::string& line);
};

struct RunResult {
  std::vector<MetricsRecord> metrics;
  int last_step = 0;
  bool halted_early = false;
  std::string halt_reason;
};

/// Owns the device pool, clusters and the per-step iteration loop of both
/// pipelines: generation (rollout scheduler) -> inference (reference
/// forward) -> training (data-parallel PPO) -> parameter sync.
class PipelineRunner {
 public:
  explicit PipelineRunner(RunConfig config);
  ~PipelineRunner();

  PipelineRunner(const PipelineRunner&) = delete;
  PipelineRunner& operator=(const PipelineRunner&) = delete;

  /// Fresh run: format warmup, then total_steps iterations from step 1.
  RunResult run();

  /// Continues from a loaded checkpoint (config hash already verified).
  RunResult resume(const RunCheckpoint& ckpt);

  const EventLog& events() const { return *events_; }
  const ColocationReport& placement() const { return placement_report_; }
  bool has_cluster(const std::string& name) const { return cluster_index_.count(name) > 0; }
  Cluster& cluster(const std::string& name);

  /// Most recent training batch (episode traces / scored samples), kept for
  /// metric cross-checks.
  const SampleBatch& last_batch() const { return last_batch_; }

 private:
  struct StepOutput {
    SampleBatch batch;
    MetricsRecord metrics;
  };

  void setup_output_dir();
  void warmup();
  RunResult run_steps(int first_step);
  StepOutput generation_stage(int step);
  void inference_stage(int step, SampleBatch& batch);
  UpdateStats training_stage(int step, SampleBatch& batch);
  void run_validation(MetricsRecord& record);
  void save_step_checkpoint(int step);
  void append_metrics(const MetricsRecord& record);
  void flush_events();

  SampleBatch build_warmup_batch(int step, int count);
  std::vector<int> greedy_action(const PolicyParams& params, std::span<const int> context,
                                 std::vector<double>* logprobs, uint64_t seed, uint64_t key) const;

  RunConfig cfg_;
  const Vocabulary& vocab_;
  PolicyLayout layout_;
  std::unique_ptr<ResourcePool> pool_;
  BindingPlan plan_;
  ColocationReport placement_report_;
  std::unique_ptr<EventLog> events_;
  size_t events_flushed_ = 0;
  std::vector<std::unique_ptr<Cluster>> clusters_;
  std::map<std::string, Cluster*> cluster_index_;
  std::unique_ptr<DomainSampler> sampler_;  // rlvr
  std::string metrics_path_;
  std::string events_path_;
  SampleBatch last_batch_;
  uint64_t cumulative_tokens_ = 0;
  uint64_t cumulative_wasted_ = 0;
  uint64_t request_counter_ = 0;
};

RunResult run_pipeline(const RunConfig& config);
RunResult resume_pipeline(const RunConfig& config, const std::string& checkpoint_path);

/// `report` aggregation: per-metric min / max / final over a metrics file.
struct MetricsSummary {
  struct Row {
    std::string name;
    double min = 0, max = 0, final_value = 0;
  };
  std::vector<Row> rows;
  size_t records = 0;

  std::string to_table() const;
};

std::vector<MetricsRecord> load_metrics_jsonl(const std::string& path);
MetricsSummary summarize_metrics(const std::vector<MetricsRecord>& records);
std::string metrics_to_csv(const std::vector<MetricsRecord>& records);

}  // namespace rollmini
