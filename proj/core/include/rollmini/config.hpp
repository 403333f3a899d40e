// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rollmini/environments.hpp"
#include "rollmini/policy.hpp"
#include "rollmini/resource_pool.hpp"
#include "rollmini/rewards.hpp"
#include "rollmini/scheduler.hpp"

namespace rollmini::toml {
class Table;
}

namespace rollmini {

enum class PipelineKind { rlvr, agentic };
const char* to_string(PipelineKind kind);

/// One cluster's placement plus sizing. Reward clusters additionally carry
/// their verifier kind and simulated latency.
struct ClusterSpec {
  std::string name;                 // actor_train, actor_infer, reference, critic, environment, reward_*
  Role role = Role::actor_train;
  std::vector<std::string> devices;
  int64_t memory = 0;
  int world_size = 1;
  std::string reward_kind;          // math_verify | sandbox | general_match
  uint64_t reward_latency = 2;
};

struct RunConfig {
  PipelineKind pipeline = PipelineKind::agentic;
  uint64_t seed = 0;
  int total_steps = 1;
  int rollout_batch_size = 1024;
  int checkpoint_every = 0;  // 0 = only on halt
  int validate_every = 0;    // 0 = off
  int validation_episodes = 16;
  std::string output_dir = "runs/out";

  // Simulated device pool.
  int gpu_count = 2;
  int cpu_count = 4;
  int64_t gpu_memory = 100;
  int64_t cpu_memory = 100;

  std::map<std::string, ClusterSpec> clusters;

  // Policy dims; vocab_size 0 derives from the built-in vocabulary.
  int vocab_size = 0;
  int embed_dim = 8;
  int context_window = 24;
  int hidden_dim = 48;
  int warmup_steps = 0;
  int warmup_batch = 32;
  double warmup_lr = 0.0;  // 0 = use train.learning_rate

  GenConfig gen;                       // seed is stamped per step
  std::vector<std::string> stop_tokens = {"</answer>"};
  TrainConfig train;
  bool critic_enabled = false;
  int sync_bucket_size = 256;

  // Generation-stage quota (rlvr); agentic derives a filter-off, G=1 quota
  // from rollout_batch_size.
  QuotaSpec quota{16, 4, 2.0, true};

  // Environment block (agentic).
  EnvKind env_kind = EnvKind::FrozenLake;
  int env_max_turns = 15;
  uint64_t env_seed_base = 0;
  uint32_t distinct_env_seeds = 1;
  bool env_slippery = false;
  RewardConstants env_rewards;

  // Scheduler latency model.
  uint32_t decode_interval_span = 10;
  uint64_t env_step_ticks = 2;
  uint64_t finalize_ticks = 1;

  // Reward routing (rlvr).
  RouteTable routes;
  std::map<std::string, std::string> datasets;  // domain -> jsonl path

  void validate() const;
  std::vector<DeviceSpec> device_specs() const;
  DeviceMappingConfig device_mapping() const;
  std::vector<std::pair<std::string, int>> role_worlds() const;  // cluster name -> world size

  /// Canonical JSON of every reproducibility-relevant field (output_dir
  /// excluded, so a resumed run may write elsewhere).
  std::string to_json() const;
  uint64_t config_hash() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_table(const toml::Table& table);

}  // namespace rollmini
