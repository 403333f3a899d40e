// SPDX-License-Identifier: Apache-2.0
#include "rollmini/config.hpp"

#include <set>

#include <json.hpp>

#include "rollmini/errors.hpp"
#include "rollmini/rng.hpp"
#include "rollmini/tomlmini.hpp"

namespace rollmini {

using nlohmann::json;

const char* to_string(PipelineKind kind) { return kind == PipelineKind::rlvr ? "rlvr" : "agentic"; }

namespace {

Role role_of_cluster(const std::string& name) {
  if (name.rfind("reward", 0) == 0) return Role::reward;
  return role_from_string(name);
}

}  // namespace

std::vector<DeviceSpec> RunConfig::device_specs() const {
  std::vector<DeviceSpec> specs;
  for (int i = 0; i < gpu_count; ++i)
    specs.push_back({"g" + std::to_string(i), DeviceKind::gpu, gpu_memory});
  for (int i = 0; i < cpu_count; ++i)
    specs.push_back({"c" + std::to_string(i), DeviceKind::cpu, cpu_memory});
  return specs;
}

DeviceMappingConfig RunConfig::device_mapping() const {
  DeviceMappingConfig mapping;
  for (const auto& [name, spec] : clusters) mapping.roles[name] = RoleMapping{spec.devices, spec.memory};
  return mapping;
}

std::vector<std::pair<std::string, int>> RunConfig::role_worlds() const {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& [name, spec] : clusters) out.emplace_back(name, spec.world_size);
  return out;
}

void RunConfig::validate() const {
  if (total_steps < 1) throw ConfigError("config: run.total_steps must be >= 1");
  if (rollout_batch_size < 1) throw ConfigError("config: run.rollout_batch_size must be >= 1");
  if (embed_dim < 1 || context_window < 1 || hidden_dim < 1)
    throw ConfigError("config: policy dims (embed_dim, context_window, hidden_dim) must be positive");
  if (sync_bucket_size < 1) throw ConfigError("config: train.sync_bucket_size must be >= 1");
  gen.validate();
  train.validate();
  quota.validate();
  if (decode_interval_span == 0) throw ConfigError("config: scheduler.decode_interval_span must be positive");

  auto require_cluster = [&](const std::string& name) {
    if (!clusters.count(name)) throw ConfigError("config: mapping." + name + " is required for this pipeline");
  };
  require_cluster("actor_train");
  require_cluster("actor_infer");
  require_cluster("reference");
  if (critic_enabled) require_cluster("critic");
  if (!critic_enabled && clusters.count("critic"))
    throw ConfigError("config: mapping.critic present but train.critic_enabled is false");

  std::set<std::string> device_ids;
  for (const auto& spec : device_specs()) device_ids.insert(spec.device_id);
  for (const auto& [name, spec] : clusters) {
    if (spec.devices.empty()) throw ConfigError("config: mapping." + name + ".devices must be non-empty");
    if (spec.world_size < 1) throw ConfigError("config: mapping." + name + ".world_size must be >= 1");
    for (const auto& dev : spec.devices)
      if (!device_ids.count(dev))
        throw ConfigError("config: mapping." + name + " references unknown device '" + dev + "'");
  }

  if (pipeline == PipelineKind::agentic) {
    require_cluster("environment");
  } else {
    if (routes.routes.empty()) throw ConfigError("config: routes section is required for the rlvr pipeline");
    routes.validate();
    for (const auto& [domain, cluster] : routes.routes) {
      if (!clusters.count(cluster))
        throw ConfigError("config: routes." + domain + " names unknown cluster '" + cluster + "'");
      if (clusters.at(cluster).role != Role::reward)
        throw ConfigError("config: routes." + domain + " must name a reward cluster");
      if (!datasets.count(domain))
        throw ConfigError("config: datasets." + domain + " is required for routed domain '" + domain + "'");
    }
  }
}

std::string RunConfig::to_json() const {
  json j;
  j["pipeline"] = to_string(pipeline);
  j["run"] = {{"seed", seed},
              {"total_steps", total_steps},
              {"rollout_batch_size", rollout_batch_size},
              {"checkpoint_every", checkpoint_every},
              {"validate_every", validate_every},
              {"validation_episodes", validation_episodes}};
  j["devices"] = {{"gpu_count", gpu_count},
                  {"cpu_count", cpu_count},
                  {"gpu_memory", gpu_memory},
                  {"cpu_memory", cpu_memory}};
  json jclusters;
  for (const auto& [name, spec] : clusters) {
    jclusters[name] = {{"devices", spec.devices}, {"memory", spec.memory},
                       {"world_size", spec.world_size}};
    if (spec.role == Role::reward) {
      jclusters[name]["reward_kind"] = spec.reward_kind;
      jclusters[name]["reward_latency"] = spec.reward_latency;
    }
  }
  j["mapping"] = jclusters;
  j["policy"] = {{"vocab_size", vocab_size}, {"embed_dim", embed_dim},
                 {"context_window", context_window}, {"hidden_dim", hidden_dim},
                 {"warmup_steps", warmup_steps}, {"warmup_batch", warmup_batch},
                 {"warmup_lr", warmup_lr}};
  j["generation"] = {{"max_new_tokens", gen.max_new_tokens}, {"temperature", gen.temperature},
                     {"stop_tokens", stop_tokens}};
  j["train"] = {{"clip_eps", train.clip_eps}, {"kl_coef", train.kl_coef},
                {"learning_rate", train.learning_rate}, {"advantage_clip", train.advantage_clip},
                {"reward_clip", train.reward_clip}, {"gamma", train.gamma},
                {"whiten_advantages", train.whiten_advantages}, {"critic_enabled", critic_enabled},
                {"sync_bucket_size", sync_bucket_size}};
  j["quota"] = {{"target_valid_prompts", quota.target_valid_prompts}, {"group_size", quota.group_size},
                {"oversample_factor", quota.oversample_factor}, {"dynamic_sampling", quota.filter_uniform}};
  j["environment"] = {{"kind", to_string(env_kind)}, {"max_turns", env_max_turns},
                      {"seed_base", env_seed_base}, {"distinct_seeds", distinct_env_seeds},
                      {"slippery", env_slippery},
                      {"step_penalty", env_rewards.step_penalty},
                      {"format_penalty", env_rewards.format_penalty},
                      {"success_reward", env_rewards.success_reward},
                      {"box_shaping", env_rewards.box_shaping}};
  j["scheduler"] = {{"decode_interval_span", decode_interval_span}, {"env_step_ticks", env_step_ticks},
                    {"finalize_ticks", finalize_ticks}};
  j["routes"] = routes.routes;
  j["ratios"] = routes.ratios;
  j["datasets"] = datasets;
  return j.dump(2);
}

uint64_t RunConfig::config_hash() const { return rng::hash_str(to_json()); }

RunConfig run_config_from_table(const toml::Table& t) {
  RunConfig cfg;
  const std::string pipeline = t.require_string("run.pipeline");
  if (pipeline == "rlvr")
    cfg.pipeline = PipelineKind::rlvr;
  else if (pipeline == "agentic")
    cfg.pipeline = PipelineKind::agentic;
  else
    throw ConfigError("config: run.pipeline must be 'rlvr' or 'agentic', got '" + pipeline + "'");

  cfg.seed = static_cast<uint64_t>(t.get_int("run.seed", 0));
  cfg.total_steps = static_cast<int>(t.get_int("run.total_steps", 1));
  cfg.rollout_batch_size = static_cast<int>(t.get_int("run.rollout_batch_size", 1024));
  cfg.checkpoint_every = static_cast<int>(t.get_int("run.checkpoint_every", 0));
  cfg.validate_every = static_cast<int>(t.get_int("run.validate_every", 0));
  cfg.validation_episodes = static_cast<int>(t.get_int("run.validation_episodes", 16));
  cfg.output_dir = t.get_string("run.output_dir", "runs/out");

  cfg.gpu_count = static_cast<int>(t.get_int("devices.gpu_count", 2));
  cfg.cpu_count = static_cast<int>(t.get_int("devices.cpu_count", 4));
  cfg.gpu_memory = t.get_int("devices.gpu_memory", 100);
  cfg.cpu_memory = t.get_int("devices.cpu_memory", 100);

  for (const auto& name : t.subsections("mapping")) {
    ClusterSpec spec;
    spec.name = name;
    spec.role = role_of_cluster(name);
    spec.devices = t.get_string_array("mapping." + name + ".devices");
    spec.memory = t.get_int("mapping." + name + ".memory", 10);
    spec.world_size = static_cast<int>(t.get_int("mapping." + name + ".world_size", 1));
    if (spec.role == Role::reward) {
      spec.reward_kind = t.get_string("mapping." + name + ".kind", "math_verify");
      spec.reward_latency = static_cast<uint64_t>(t.get_int("mapping." + name + ".latency", 2));
    }
    cfg.clusters[name] = std::move(spec);
  }

  cfg.vocab_size = static_cast<int>(t.get_int("policy.vocab_size", 0));
  cfg.embed_dim = static_cast<int>(t.get_int("policy.embed_dim", 8));
  cfg.context_window = static_cast<int>(t.get_int("policy.context_window", 24));
  cfg.hidden_dim = static_cast<int>(t.get_int("policy.hidden_dim", 48));
  cfg.warmup_steps = static_cast<int>(t.get_int("policy.warmup_steps", 0));
  cfg.warmup_batch = static_cast<int>(t.get_int("policy.warmup_batch", 32));
  cfg.warmup_lr = t.get_double("policy.warmup_lr", 0.0);

  cfg.gen.max_new_tokens = static_cast<int>(t.get_int("generation.max_new_tokens", 8));
  cfg.gen.temperature = t.get_double("generation.temperature", 1.0);
  if (t.has("generation.stop_tokens")) cfg.stop_tokens = t.get_string_array("generation.stop_tokens");

  cfg.train.clip_eps = t.get_double("train.clip_eps", 0.2);
  cfg.train.kl_coef = t.get_double("train.kl_coef", 0.0);
  cfg.train.learning_rate = t.get_double("train.learning_rate", 0.05);
  cfg.train.advantage_clip = t.get_double("train.advantage_clip", 10.0);
  cfg.train.reward_clip = t.get_double("train.reward_clip", 20.0);
  cfg.train.gamma = t.get_double("train.gamma", 1.0);
  cfg.train.whiten_advantages = t.get_bool("train.whiten_advantages", false);
  cfg.critic_enabled = t.get_bool("train.critic_enabled", false);
  cfg.sync_bucket_size = static_cast<int>(t.get_int("train.sync_bucket_size", 256));

  cfg.quota.target_valid_prompts = static_cast<size_t>(t.get_int("quota.target_valid_prompts", 16));
  cfg.quota.group_size = static_cast<size_t>(t.get_int("quota.group_size", 4));
  cfg.quota.oversample_factor = t.get_double("quota.oversample_factor", 2.0);
  cfg.quota.filter_uniform = t.get_bool("quota.dynamic_sampling", true);

  if (t.has("environment.kind")) cfg.env_kind = env_kind_from_string(t.require_string("environment.kind"));
  cfg.env_max_turns = static_cast<int>(t.get_int("environment.max_turns", 15));
  cfg.env_seed_base = static_cast<uint64_t>(t.get_int("environment.seed_base", 0));
  cfg.distinct_env_seeds = static_cast<uint32_t>(t.get_int("environment.distinct_seeds", 1));
  cfg.env_slippery = t.get_bool("environment.slippery", false);
  cfg.env_rewards.step_penalty = t.get_double("environment.step_penalty", -0.01);
  cfg.env_rewards.format_penalty = t.get_double("environment.format_penalty", -0.001);
  cfg.env_rewards.success_reward = t.get_double("environment.success_reward", 10.0);
  cfg.env_rewards.box_shaping = t.get_double("environment.box_shaping", 1.0);

  cfg.decode_interval_span = static_cast<uint32_t>(t.get_int("scheduler.decode_interval_span", 10));
  cfg.env_step_ticks = static_cast<uint64_t>(t.get_int("scheduler.env_step_ticks", 2));
  cfg.finalize_ticks = static_cast<uint64_t>(t.get_int("scheduler.finalize_ticks", 1));

  for (const auto& [key, value] : t.entries()) {
    if (key.rfind("routes.", 0) == 0) {
      if (value.kind != toml::Value::Kind::string)
        throw ConfigError("config: field '" + key + "' must be a string");
      cfg.routes.routes[key.substr(7)] = value.str;
    } else if (key.rfind("ratios.", 0) == 0) {
      cfg.routes.ratios[key.substr(7)] = value.kind == toml::Value::Kind::integer
                                             ? static_cast<double>(value.integer)
                                             : value.floating;
    } else if (key.rfind("datasets.", 0) == 0) {
      if (value.kind != toml::Value::Kind::string)
        throw ConfigError("config: field '" + key + "' must be a string");
      cfg.datasets[key.substr(9)] = value.str;
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg = run_config_from_table(toml::Table::parse_file(path));
  cfg.validate();
  return cfg;
}

}  // namespace rollmini
