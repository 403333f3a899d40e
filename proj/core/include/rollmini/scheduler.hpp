// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <span>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rollmini/errors.hpp"
#include "rollmini/sample.hpp"
#include "rollmini/sim_clock.hpp"

namespace rollmini {

enum class RequestState { Queued, Generating, AwaitingEnv, AwaitingReward, Completed, Aborted };

const char* to_string(RequestState state);
bool is_terminal(RequestState state);

/// Legal lifecycle moves; abort is additionally legal from any non-terminal
/// state (a queued request can be withdrawn before it ever generates).
bool legal_transition(RequestState from, RequestState to);

struct RolloutRequest {
  std::string request_id;
  std::string sample_id;
  std::string group_id;
  std::string domain_tag;
  RequestState state = RequestState::Queued;
  uint64_t submit_seq = 0;
  uint64_t tokens_generated = 0;
};

struct QuotaSpec {
  size_t target_valid_prompts = 0;
  size_t group_size = 1;         // G
  double oversample_factor = 1.0;
  bool filter_uniform = true;    // dynamic sampling on/off

  void validate() const;
};

struct SchedulerStats {
  uint64_t admitted = 0;
  uint64_t completed = 0;
  uint64_t aborted = 0;
  uint64_t filtered_groups = 0;
  uint64_t retained_groups = 0;
  uint64_t tokens_generated_total = 0;
  uint64_t tokens_wasted_aborted = 0;

  uint64_t in_flight() const { return admitted - completed - aborted; }
};

/// run_until_quota could not assemble target x G retained samples within
/// the admission budget; carries whatever was retained.
class QuotaShortfall : public Error {
 public:
  QuotaShortfall(const std::string& what, SampleBatch partial, SchedulerStats stats)
      : Error(what), partial_results(std::move(partial)), stats(stats) {}
  SampleBatch partial_results;
  SchedulerStats stats;
};

/// A group is retained iff its accuracies are not uniformly 1 and not
/// uniformly 0. Empty groups are an input error.
std::vector<std::string> group_filter(
    const std::vector<std::pair<std::string, std::vector<double>>>& groups);

struct PromptSubmission {
  std::vector<int> prompt_tokens;
  std::string sample_id;
  std::string group_id;
  std::string domain_tag;
  std::map<std::string, std::string> meta;  // gold / tests for reward workers
};

/// Pull source for dynamic admission: one call yields a full group of G
/// submissions sharing a fresh group id, or nullopt when exhausted.
class PromptSource {
 public:
  virtual ~PromptSource() = default;
  virtual std::optional<std::vector<PromptSubmission>> next_group() = 0;
};

/// Incremental generation: one token for one request. Implementations wrap
/// the actor_infer cluster (slot == worker rank) or a scripted stub.
class GenerationBackend {
 public:
  struct Step {
    int token = 0;
    double logprob = 0.0;
    uint64_t params_version = 0;
  };
  virtual ~GenerationBackend() = default;
  virtual Step decode(int slot, std::span<const int> context, const std::string& sample_id,
                      size_t position) = 0;
  virtual int slots() const = 0;
};

/// Multi-turn environment interaction for agentic rollouts.
class EnvironmentBackend {
 public:
  struct Begin {
    std::vector<int> prompt_tokens;
  };
  struct StepResult {
    std::vector<int> obs_tokens;
    bool done = false;
    SampleRecord finalized;  // valid when done
  };
  virtual ~EnvironmentBackend() = default;
  virtual Begin begin(int worker_rank, const RolloutRequest& request, uint64_t instance_seed,
                      uint64_t episode_seed) = 0;
  virtual StepResult step(int worker_rank, const std::string& request_id,
                          std::span<const int> action_tokens, std::span<const double> logprobs) = 0;
  virtual void abort(int worker_rank, const std::string& request_id) = 0;
  virtual int workers() const = 0;
};

/// Per-sample reward computation, routed by domain tag.
class RewardBackend {
 public:
  virtual ~RewardBackend() = default;
  /// Scores the sample; returns it with scalar_reward/rewards/meta filled.
  virtual SampleRecord compute(const std::string& domain_tag, int worker_rank, SampleRecord sample) = 0;
  virtual int workers(const std::string& domain_tag) const = 0;
  virtual uint64_t latency_ticks(const std::string& domain_tag) const = 0;
};

struct SchedulerConfig {
  int max_new_tokens_per_turn = 8;
  std::vector<int> stop_tokens;  // turn terminators (stop-token ids)
  int max_turns = 1;             // 1 = single-turn (no environment phase)
  uint64_t seed = 0;             // latency hashes + env seeds
  uint32_t decode_interval_span = 10;  // per-request decode interval = 1 + hash % span
  uint64_t env_step_ticks = 2;
  uint64_t finalize_ticks = 1;   // agentic episode finalization latency
  uint64_t env_seed_base = 0;    // instance seed base for agentic episodes
  uint32_t distinct_env_seeds = 1;

  void validate() const;
};

/// Owns the per-sample rollout lifecycle of one generation stage: admits
/// prompt requests individually, walks them through decode / environment /
/// reward events on the deterministic clock, filters uninformative groups,
/// tops up admission on demand and aborts surplus work. All state
/// transitions happen on the caller's thread inside clock events.
class RolloutScheduler {
 public:
  RolloutScheduler(SimClock& clock, EventLog& log, SchedulerConfig config, GenerationBackend& gen,
                   EnvironmentBackend* env, RewardBackend* reward);

  /// Admits one request (Queued). Rejected once draining.
  std::string submit(PromptSubmission submission);

  /// Admission stop: subsequent submit() calls fail.
  void drain() { draining_ = true; }

  /// Marks generation complete for a request and dispatches its reward
  /// asynchronously. Normally driven internally by decode events; exposed
  /// for lifecycle tests. Double signals are lifecycle errors.
  void on_sample_complete(const std::string& request_id);

  /// Aborts a live request; returns whether a non-terminal request was hit.
  bool abort(const std::string& request_id);

  /// Runs the event loop until target x G samples from retained groups are
  /// available (aborting surplus work when abort_requests) or admission is
  /// exhausted (QuotaShortfall). Returns retained samples in ascending
  /// group-completion order.
  SampleBatch run_until_quota(const QuotaSpec& quota, PromptSource* source, bool abort_requests = true);

  const SchedulerStats& stats() const { return stats_; }
  const RolloutRequest& request(const std::string& request_id) const;
  std::vector<SampleRecord> completed_samples() const;  // all Completed, completion order

 private:
  struct RequestCtx {
    RolloutRequest req;
    std::vector<int> prompt;
    std::vector<int> response;
    std::vector<double> logprobs;
    std::vector<uint8_t> mask;
    std::map<std::string, std::string> meta;
    size_t turn_start = 0;       // response index where the current turn's action begins
    size_t gen_position = 0;     // generated-token counter (rng position)
    int turns = 0;
    int slot = -1;
    int env_rank = -1;
    bool env_live = false;
    uint64_t decode_interval = 1;
    uint64_t params_version = 0;
    uint64_t epoch = 0;  // invalidates stale scheduled events
    SampleRecord finished;
    bool has_finished = false;
  };

  struct GroupInfo {
    size_t expected = 0;
    std::vector<std::string> request_ids;
    size_t completed = 0;
    bool resolved = false;
    bool retained = false;
    uint64_t completion_seq = 0;
  };

  RequestCtx& ctx(const std::string& request_id);
  void log_transition(const RequestCtx& rc, RequestState from, RequestState to);
  void transition(RequestCtx& rc, RequestState to);
  void pump();
  void start_generating(RequestCtx& rc);
  void schedule_decode(RequestCtx& rc);
  void decode_event(const std::string& request_id, uint64_t epoch);
  void turn_complete(RequestCtx& rc);
  void env_event(const std::string& request_id, uint64_t epoch);
  void reward_event(const std::string& request_id, uint64_t epoch);
  void complete(RequestCtx& rc, SampleRecord finished);
  void group_done(const std::string& group_id);
  void admit_on_demand();
  void trigger_quota_met();
  SampleRecord snapshot_sample(const RequestCtx& rc) const;

  SimClock& clock_;
  EventLog& log_;
  SchedulerConfig config_;
  GenerationBackend& gen_;
  EnvironmentBackend* env_;
  RewardBackend* reward_;

  std::map<std::string, RequestCtx> requests_;
  std::deque<std::string> queue_;         // Queued, submit order
  std::deque<std::string> resume_queue_;  // AwaitingEnv waiting for a slot
  std::vector<int> free_slots_;
  std::map<std::string, GroupInfo> groups_;
  std::vector<std::string> retained_order_;
  std::vector<std::string> completion_order_;  // request ids, completion order
  std::map<std::string, uint64_t> reward_rr_;  // per-domain round robin
  uint64_t env_rr_ = 0;
  uint64_t next_seq_ = 0;
  uint64_t next_group_seq_ = 0;
  uint64_t episode_counter_ = 0;
  bool draining_ = false;

  // run_until_quota state
  const QuotaSpec* active_quota_ = nullptr;
  PromptSource* source_ = nullptr;
  bool source_exhausted_ = false;
  bool abort_enabled_ = true;
  bool quota_met_ = false;
  size_t budget_groups_ = 0;
  size_t admitted_groups_ = 0;
  size_t resolved_groups_ = 0;

  SchedulerStats stats_;
};

}  // namespace rollmini
