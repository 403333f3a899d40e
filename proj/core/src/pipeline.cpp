// SPDX-License-Identifier: Apache-2.0
#include "rollmini/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rollmini/environments.hpp"
#include "rollmini/errors.hpp"
#include "rollmini/log.hpp"
#include "rollmini/policy_workers.hpp"
#include "rollmini/rewards.hpp"
#include "rollmini/rng.hpp"

namespace rollmini {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Metrics

std::string MetricsRecord::to_json() const {
  json j;
  j["step"] = step;
  j["success_rate"] = success_rate;
  j["effective_action_rate"] = effective_action_rate;
  j["avg_steps"] = avg_steps;
  j["mean_reward"] = mean_reward;
  j["accuracy"] = accuracy;
  if (!domain_accuracy.empty()) j["domain_accuracy"] = domain_accuracy;
  j["loss"] = loss;
  j["mean_ratio"] = mean_ratio;
  j["clip_fraction"] = clip_fraction;
  j["mean_kl"] = mean_kl;
  j["tokens_generated"] = tokens_generated;
  j["tokens_wasted_aborted"] = tokens_wasted_aborted;
  j["wall_ticks"] = wall_ticks;
  if (val_success_rate) j["val_success_rate"] = *val_success_rate;
  if (val_effective_rate) j["val_effective_rate"] = *val_effective_rate;
  if (val_accuracy) j["val_accuracy"] = *val_accuracy;
  return j.dump();
}

MetricsRecord MetricsRecord::from_json(const std::string& line) {
  json j = json::parse(line);
  MetricsRecord r;
  r.step = j.at("step").get<int>();
  r.success_rate = j.value("success_rate", 0.0);
  r.effective_action_rate = j.value("effective_action_rate", 0.0);
  r.avg_steps = j.value("avg_steps", 0.0);
  r.mean_reward = j.value("mean_reward", 0.0);
  r.accuracy = j.value("accuracy", 0.0);
  if (j.contains("domain_accuracy"))
    r.domain_accuracy = j["domain_accuracy"].get<std::map<std::string, double>>();
  r.loss = j.value("loss", 0.0);
  r.mean_ratio = j.value("mean_ratio", 0.0);
  r.clip_fraction = j.value("clip_fraction", 0.0);
  r.mean_kl = j.value("mean_kl", 0.0);
  r.tokens_generated = j.value("tokens_generated", uint64_t{0});
  r.tokens_wasted_aborted = j.value("tokens_wasted_aborted", uint64_t{0});
  r.wall_ticks = j.value("wall_ticks", uint64_t{0});
  if (j.contains("val_success_rate")) r.val_success_rate = j["val_success_rate"].get<double>();
  if (j.contains("val_effective_rate")) r.val_effective_rate = j["val_effective_rate"].get<double>();
  if (j.contains("val_accuracy")) r.val_accuracy = j["val_accuracy"].get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// Cluster-backed scheduler backends

namespace {

class ClusterGeneration final : public GenerationBackend {
 public:
  ClusterGeneration(Cluster& infer, double temperature, uint64_t seed)
      : infer_(infer), temperature_(temperature), seed_(seed) {}

  Step decode(int slot, std::span<const int> context, const std::string& sample_id,
              size_t position) override {
    Message msg;
    msg.tensors["context"].assign(context.begin(), context.end());
    msg.scalars["temperature"] = temperature_;
    msg.scalars["position"] = static_cast<double>(position);
    msg.fields["seed"] = std::to_string(seed_);
    msg.fields["sample_key"] = std::to_string(rng::hash_str(sample_id));
    Message reply = infer_.call_rank(slot, "decode_step", msg);
    Step step;
    step.token = static_cast<int>(reply.scalar("token"));
    step.logprob = reply.scalar("logprob");
    step.params_version = std::stoull(reply.field("version"));
    return step;
  }

  int slots() const override { return infer_.world_size(); }

 private:
  Cluster& infer_;
  double temperature_;
  uint64_t seed_;
};

class ClusterEnvironment final : public EnvironmentBackend {
 public:
  explicit ClusterEnvironment(Cluster& env) : env_(env) {}

  Begin begin(int worker_rank, const RolloutRequest& request, uint64_t instance_seed,
              uint64_t episode_seed) override {
    Message msg;
    msg.fields["request_id"] = request.request_id;
    msg.fields["sample_id"] = request.sample_id;
    msg.fields["group_id"] = request.group_id;
    msg.fields["domain_tag"] = request.domain_tag;
    msg.fields["instance_seed"] = std::to_string(instance_seed);
    msg.fields["episode_seed"] = std::to_string(episode_seed);
    Message reply = env_.call_rank(worker_rank, "env_begin", msg);
    Begin out;
    const auto& toks = reply.tensor("prompt_tokens");
    out.prompt_tokens.assign(toks.begin(), toks.end());
    return out;
  }

  StepResult step(int worker_rank, const std::string& request_id, std::span<const int> action_tokens,
                  std::span<const double> logprobs) override {
    Message msg;
    msg.fields["request_id"] = request_id;
    msg.tensors["action_tokens"].assign(action_tokens.begin(), action_tokens.end());
    msg.tensors["action_logprobs"].assign(logprobs.begin(), logprobs.end());
    Message reply = env_.call_rank(worker_rank, "env_step", msg);
    StepResult out;
    const auto& toks = reply.tensor("obs_tokens");
    out.obs_tokens.assign(toks.begin(), toks.end());
    out.done = reply.scalar("done") != 0.0;
    if (out.done) out.finalized = reply.batch.samples.at(0);
    return out;
  }

  void abort(int worker_rank, const std::string& request_id) override {
    Message msg;
    msg.fields["request_id"] = request_id;
    env_.call_rank(worker_rank, "env_abort", msg);
  }

  int workers() const override { return env_.world_size(); }

 private:
  Cluster& env_;
};

class ClusterReward final : public RewardBackend {
 public:
  struct Route {
    Cluster* cluster = nullptr;
    uint64_t latency = 2;
  };

  explicit ClusterReward(std::map<std::string, Route> routes) : routes_(std::move(routes)) {}

  SampleRecord compute(const std::string& domain_tag, int worker_rank, SampleRecord sample) override {
    Message msg;
    msg.batch.push_back(std::move(sample));
    Message reply = at(domain_tag).cluster->call_rank(worker_rank, "compute_reward", msg);
    return reply.batch.samples.at(0);
  }

  int workers(const std::string& domain_tag) const override { return at(domain_tag).cluster->world_size(); }
  uint64_t latency_ticks(const std::string& domain_tag) const override { return at(domain_tag).latency; }

 private:
  const Route& at(const std::string& domain) const {
    auto it = routes_.find(domain);
    if (it == routes_.end()) throw RoutingError("reward backend: no route for domain '" + domain + "'");
    return it->second;
  }
  std::map<std::string, Route> routes_;
};

class RlvrSource final : public PromptSource {
 public:
  RlvrSource(const DomainSampler& sampler, const Vocabulary& vocab, rng::Stream stream, uint64_t key,
             int attempt, size_t group_size)
      : sampler_(sampler), vocab_(vocab), stream_(stream), key_(key), attempt_(attempt),
        group_size_(group_size) {}

  std::optional<std::vector<PromptSubmission>> next_group() override {
    const TaskRecord& rec = sampler_.draw(stream_);
    const std::string gid =
        "v" + std::to_string(key_) + "a" + std::to_string(attempt_) + "g" + std::to_string(next_++);
    std::vector<PromptSubmission> group;
    for (size_t k = 0; k < group_size_; ++k) {
      PromptSubmission sub;
      sub.prompt_tokens = vocab_.tokenize(rec.prompt);
      sub.group_id = gid;
      sub.sample_id = gid + "-" + std::to_string(k);
      sub.domain_tag = rec.domain_tag;
      if (!rec.gold_answer.empty()) sub.meta["gold"] = rec.gold_answer;
      if (!rec.tests_json.empty()) sub.meta["tests"] = rec.tests_json;
      sub.meta["prompt_text"] = rec.prompt;
      group.push_back(std::move(sub));
    }
    return group;
  }

 private:
  const DomainSampler& sampler_;
  const Vocabulary& vocab_;
  rng::Stream stream_;
  uint64_t key_;
  int attempt_;
  size_t group_size_;
  uint64_t next_ = 0;
};

class AgenticSource final : public PromptSource {
 public:
  AgenticSource(uint64_t key, size_t budget) : key_(key), budget_(budget) {}

  std::optional<std::vector<PromptSubmission>> next_group() override {
    if (next_ >= budget_) return std::nullopt;
    PromptSubmission sub;
    const std::string gid = "v" + std::to_string(key_) + "e" + std::to_string(next_++);
    sub.group_id = gid;
    sub.sample_id = gid;
    sub.domain_tag = "agentic";
    return std::vector<PromptSubmission>{std::move(sub)};
  }

 private:
  uint64_t key_;
  size_t budget_;
  uint64_t next_ = 0;
};

double meta_double(const SampleRecord& s, const std::string& key, double fallback = 0.0) {
  auto it = s.meta.find(key);
  if (it == s.meta.end()) return fallback;
  return std::stod(it->second);
}

}  // namespace

// ---------------------------------------------------------------------------
// Runner

PipelineRunner::PipelineRunner(RunConfig config)
    : cfg_(std::move(config)), vocab_(Vocabulary::standard()) {
  cfg_.validate();
  if (cfg_.vocab_size != 0 && cfg_.vocab_size != vocab_.size())
    throw ConfigError("config: policy.vocab_size " + std::to_string(cfg_.vocab_size) +
                      " does not match the built-in vocabulary (" + std::to_string(vocab_.size()) + ")");
  layout_ = PolicyLayout{vocab_.size(), cfg_.embed_dim, cfg_.context_window, cfg_.hidden_dim};

  pool_ = std::make_unique<ResourcePool>(cfg_.device_specs());
  plan_ = pool_->bind_roles(cfg_.device_mapping(), cfg_.role_worlds());
  placement_report_ = colocation_report(*pool_, plan_);
  events_ = std::make_unique<EventLog>();

  const PolicyParams initial = PolicyParams::init(layout_, cfg_.seed);
  auto policy_factory = policy_worker_factory(initial, vocab_, cfg_.train);

  auto add_cluster = [&](const std::string& name, Role role, const WorkerFactory& factory) {
    const ClusterSpec& spec = cfg_.clusters.at(name);
    clusters_.push_back(std::make_unique<Cluster>(role, spec.world_size, plan_, factory, name));
    cluster_index_[name] = clusters_.back().get();
  };

  add_cluster("actor_train", Role::actor_train, policy_factory);
  add_cluster("actor_infer", Role::actor_infer, policy_factory);
  add_cluster("reference", Role::reference, policy_factory);
  if (cfg_.critic_enabled) add_cluster("critic", Role::critic, policy_factory);

  if (cfg_.pipeline == PipelineKind::agentic) {
    EnvWorkerConfig env_cfg;
    env_cfg.kind = cfg_.env_kind;
    env_cfg.max_turns = cfg_.env_max_turns;
    env_cfg.options.max_steps = cfg_.env_max_turns;
    env_cfg.options.rewards = cfg_.env_rewards;
    env_cfg.options.slippery = cfg_.env_slippery;
    add_cluster("environment", Role::environment, env_worker_factory(env_cfg, vocab_));
  } else {
    std::map<std::string, std::vector<TaskRecord>> by_domain;
    for (const auto& [domain, path] : cfg_.datasets) by_domain[domain] = load_task_jsonl(path);
    sampler_ = std::make_unique<DomainSampler>(std::move(by_domain), cfg_.routes.ratios);
    for (const auto& [name, spec] : cfg_.clusters) {
      if (spec.role != Role::reward) continue;
      add_cluster(name, Role::reward,
                  reward_worker_factory(reward_kind_from_string(spec.reward_kind), vocab_,
                                        cfg_.env_rewards.format_penalty));
    }
  }
  setup_output_dir();
}

PipelineRunner::~PipelineRunner() = default;

Cluster& PipelineRunner::cluster(const std::string& name) {
  auto it = cluster_index_.find(name);
  if (it == cluster_index_.end()) throw ConfigError("pipeline: no cluster named '" + name + "'");
  return *it->second;
}

void PipelineRunner::setup_output_dir() {
  fs::create_directories(cfg_.output_dir);
  fs::create_directories(cfg_.output_dir + "/checkpoints");
  metrics_path_ = cfg_.output_dir + "/metrics.jsonl";
  events_path_ = cfg_.output_dir + "/events.jsonl";
  std::ofstream(metrics_path_, std::ios::trunc);
  std::ofstream(events_path_, std::ios::trunc);
  std::ofstream(cfg_.output_dir + "/config_resolved.json", std::ios::trunc) << cfg_.to_json() << '\n';
  std::ofstream(cfg_.output_dir + "/colocation_report.json", std::ios::trunc)
      << placement_report_.to_json() << '\n';
}

void PipelineRunner::append_metrics(const MetricsRecord& record) {
  std::ofstream os(metrics_path_, std::ios::app);
  os << record.to_json() << '\n';
}

void PipelineRunner::flush_events() {
  events_->append_to_file(events_path_, events_flushed_);
  events_flushed_ = events_->entries().size();
}

// ---------------------------------------------------------------------------
// Warmup: supervised format priming through the PPO path (ratio one,
// advantage one reduces the clipped surrogate to cross-entropy). Plays the
// role of starting RL from an instruct model rather than raw noise.

SampleBatch PipelineRunner::build_warmup_batch(int step, int count) {
  rng::Stream stream(rng::mix({cfg_.seed, 0x7761726dULL, static_cast<uint64_t>(step)}));
  SampleBatch batch;
  const int answer_open = vocab_.id("<answer>");
  const int answer_close = vocab_.id("</answer>");
  static const char* kDirs[] = {"Up", "Down", "Left", "Right"};

  for (int i = 0; i < count; ++i) {
    SampleRecord rec;
    rec.sample_id = "warm" + std::to_string(step) + "-" + std::to_string(i);
    std::vector<int> target = {answer_open};
    if (cfg_.pipeline == PipelineKind::agentic) {
      const uint64_t instance_seed = cfg_.env_seed_base + stream.next_below(cfg_.distinct_env_seeds);
      auto env = make_env(cfg_.env_kind, instance_seed);
      rec.prompt_tokens.push_back(vocab_.id("<obs>"));
      const auto obs = vocab_.tokenize(env->render());
      rec.prompt_tokens.insert(rec.prompt_tokens.end(), obs.begin(), obs.end());
      rec.prompt_tokens.push_back(vocab_.id("</obs>"));
      target.push_back(vocab_.id(kDirs[stream.next_below(4)]));
    } else {
      const TaskRecord& task = sampler_->draw(stream);
      rec.prompt_tokens = vocab_.tokenize(task.prompt);
      if (task.domain_tag == "code") {
        target.push_back(vocab_.id("return"));
        const char* vars[] = {"a", "b", "c"};
        const char* ops[] = {"+", "-", "*"};
        target.push_back(vocab_.id(vars[stream.next_below(3)]));
        target.push_back(vocab_.id(ops[stream.next_below(3)]));
        target.push_back(vocab_.id(vars[stream.next_below(3)]));
      } else if (task.domain_tag == "general" && stream.next_double() < 0.5) {
        target.push_back(vocab_.id(kDirs[stream.next_below(4)]));
      } else {
        target.push_back(vocab_.id(std::to_string(stream.next_below(10))));
      }
    }
    target.push_back(answer_close);
    rec.response_tokens = std::move(target);
    rec.advantages.assign(rec.response_tokens.size(), 1.0);
    rec.rewards.assign(rec.response_tokens.size(), 0.0);
    batch.push_back(std::move(rec));
  }
  return batch;
}

void PipelineRunner::warmup() {
  if (cfg_.warmup_steps <= 0) return;
  Cluster& train = cluster("actor_train");
  TrainConfig wcfg = cfg_.train;
  if (cfg_.warmup_lr > 0.0) wcfg.learning_rate = cfg_.warmup_lr;
  for (int step = 0; step < cfg_.warmup_steps; ++step) {
    SampleBatch batch = build_warmup_batch(step, cfg_.warmup_batch);
    SampleBatch scored = cluster_forward_logprobs(train, batch);
    for (auto& rec : scored.samples) {
      rec.response_logprobs = rec.ref_logprobs;  // ratio-one supervision
    }
    cluster_train_step(train, scored, wcfg);
  }
  RM_INFO("warmup finished after " << cfg_.warmup_steps << " supervised steps");
}

// ---------------------------------------------------------------------------
// Stages

PipelineRunner::StepOutput PipelineRunner::generation_stage(int step) {
  Cluster& infer = cluster("actor_infer");

  StepOutput out;
  out.metrics.step = step;

  // All generation-stage randomness is keyed by the policy version rather
  // than the step index: every update opens a fresh stream, while a
  // zero-lr run replays identical steps.
  const uint64_t version = cluster_version(infer, 0);

  for (int attempt = 0;; ++attempt) {
    SimClock clock;
    SchedulerConfig scfg;
    scfg.max_new_tokens_per_turn = cfg_.gen.max_new_tokens;
    for (const auto& tok : cfg_.stop_tokens) scfg.stop_tokens.push_back(vocab_.id(tok));
    scfg.stop_tokens.push_back(vocab_.eos_id());
    scfg.max_turns = cfg_.pipeline == PipelineKind::agentic ? cfg_.env_max_turns : 1;
    scfg.seed = rng::mix({cfg_.seed, 0x7363686cULL, version});
    scfg.decode_interval_span = cfg_.decode_interval_span;
    scfg.env_step_ticks = cfg_.env_step_ticks;
    scfg.finalize_ticks = cfg_.finalize_ticks;
    scfg.env_seed_base = cfg_.env_seed_base;
    scfg.distinct_env_seeds = cfg_.distinct_env_seeds;

    ClusterGeneration gen(infer, cfg_.gen.temperature, rng::mix({cfg_.seed, 0x67656e32ULL, version}));

    std::unique_ptr<ClusterEnvironment> env_backend;
    std::unique_ptr<ClusterReward> reward_backend;
    std::unique_ptr<PromptSource> source;
    QuotaSpec quota;

    if (cfg_.pipeline == PipelineKind::agentic) {
      env_backend = std::make_unique<ClusterEnvironment>(cluster("environment"));
      quota.target_valid_prompts = static_cast<size_t>(cfg_.rollout_batch_size);
      quota.group_size = 1;
      quota.oversample_factor = 1.0;
      quota.filter_uniform = false;
      source = std::make_unique<AgenticSource>(version, static_cast<size_t>(cfg_.rollout_batch_size));
    } else {
      std::map<std::string, ClusterReward::Route> routes;
      for (const auto& [domain, cluster_name] : cfg_.routes.routes)
        routes[domain] =
            ClusterReward::Route{&cluster(cluster_name), cfg_.clusters.at(cluster_name).reward_latency};
      reward_backend = std::make_unique<ClusterReward>(std::move(routes));
      quota = cfg_.quota;
      if (attempt > 0) quota.oversample_factor *= 2.0;
      source = std::make_unique<RlvrSource>(
          *sampler_, vocab_,
          rng::Stream(rng::mix({cfg_.seed, 0x64617461ULL, version, static_cast<uint64_t>(attempt)})),
          version, attempt, quota.group_size);
    }

    RolloutScheduler scheduler(clock, *events_, scfg, gen, env_backend.get(), reward_backend.get());
    try {
      out.batch = scheduler.run_until_quota(quota, source.get(), true);
    } catch (const QuotaShortfall& e) {
      if (cfg_.pipeline == PipelineKind::rlvr && attempt == 0) {
        RM_INFO("step " << step << ": quota shortfall, retrying with doubled oversample ("
                        << e.what() << ")");
        continue;
      }
      throw;
    }

    const SchedulerStats& stats = scheduler.stats();
    out.metrics.tokens_generated = stats.tokens_generated_total;
    out.metrics.tokens_wasted_aborted = stats.tokens_wasted_aborted;
    out.metrics.wall_ticks = clock.now();

    const auto completed = scheduler.completed_samples();
    if (cfg_.pipeline == PipelineKind::rlvr) {
      std::map<std::string, std::pair<double, size_t>> by_domain;
      double acc_sum = 0.0;
      for (const auto& rec : completed) {
        const double acc = meta_double(rec, "accuracy");
        acc_sum += acc;
        auto& [sum, count] = by_domain[rec.domain_tag];
        sum += acc;
        ++count;
      }
      if (!completed.empty()) out.metrics.accuracy = acc_sum / static_cast<double>(completed.size());
      for (const auto& [domain, agg] : by_domain)
        out.metrics.domain_accuracy[domain] = agg.first / static_cast<double>(agg.second);
    } else {
      double successes = 0.0, steps_sum = 0.0, effective = 0.0, turns = 0.0;
      for (const auto& rec : out.batch.samples) {
        successes += meta_double(rec, "success");
        steps_sum += meta_double(rec, "turns");
        effective += meta_double(rec, "effective_actions");
        turns += meta_double(rec, "turns");
      }
      const double n = static_cast<double>(out.batch.size());
      if (n > 0) {
        out.metrics.success_rate = successes / n;
        out.metrics.avg_steps = steps_sum / n;
        out.metrics.accuracy = out.metrics.success_rate;
      }
      if (turns > 0) out.metrics.effective_action_rate = effective / turns;
    }
    double reward_sum = 0.0;
    for (const auto& rec : out.batch.samples) reward_sum += rec.scalar_reward.value_or(0.0);
    if (!out.batch.empty()) out.metrics.mean_reward = reward_sum / static_cast<double>(out.batch.size());

    cumulative_tokens_ += stats.tokens_generated_total;
    cumulative_wasted_ += stats.tokens_wasted_aborted;
    events_->emit({{"step", std::to_string(step)}, {"event", "stage"}, {"stage", "generation_done"}});
    return out;
  }
}

void PipelineRunner::inference_stage(int step, SampleBatch& batch) {
  batch = cluster_forward_logprobs(cluster("reference"), batch);
  if (cfg_.critic_enabled) {
    Message msg;
    msg.batch = batch;
    collect_messages(cluster("critic").dispatch("critic_forward", msg, DispatchMode::shard));
  }
  events_->emit({{"step", std::to_string(step)}, {"event", "stage"}, {"stage", "inference_done"}});
}

UpdateStats PipelineRunner::training_stage(int step, SampleBatch& batch) {
  auto advantages = compute_advantages(batch, cfg_.train);
  for (size_t s = 0; s < batch.size(); ++s) batch.samples[s].advantages = std::move(advantages[s]);
  UpdateStats stats = cluster_train_step(cluster("actor_train"), batch, cfg_.train);
  sync_params(cluster("actor_train"), cluster("actor_infer"), static_cast<size_t>(cfg_.sync_bucket_size));
  events_->emit({{"step", std::to_string(step)}, {"event", "stage"}, {"stage", "training_done"}});
  return stats;
}

// ---------------------------------------------------------------------------
// Validation: held-out instances, argmax decoding.

std::vector<int> PipelineRunner::greedy_action(const PolicyParams& params, std::span<const int> context,
                                               std::vector<double>* logprobs, uint64_t seed,
                                               uint64_t key) const {
  PolicyWorkspace ws;
  ws.resize(params.layout);
  std::vector<int> ctx(context.begin(), context.end());
  std::vector<int> out;
  const int close_id = vocab_.id("</answer>");
  for (int i = 0; i < cfg_.gen.max_new_tokens; ++i) {
    // temperature -> 0 limit: tempered sampling collapses onto the argmax.
    DecodeStep ds = decode_next(params, ctx, 1e-6, seed, key, static_cast<size_t>(i), kWindowPadToken, ws);
    out.push_back(ds.token);
    if (logprobs) logprobs->push_back(ds.logprob);
    ctx.push_back(ds.token);
    if (ds.token == close_id || ds.token == vocab_.eos_id()) break;
  }
  return out;
}

void PipelineRunner::run_validation(MetricsRecord& record) {
  const PolicyParams params = export_params(cluster("actor_infer"), 0);
  const uint64_t val_seed = rng::mix({cfg_.seed, 0x76616cULL, params.version});

  if (cfg_.pipeline == PipelineKind::agentic) {
    double successes = 0.0, effective = 0.0, turns = 0.0;
    for (int i = 0; i < cfg_.validation_episodes; ++i) {
      EnvOptions opts;
      opts.max_steps = cfg_.env_max_turns;
      opts.rewards = cfg_.env_rewards;
      opts.slippery = cfg_.env_slippery;
      opts.episode_rng_seed = rng::mix({val_seed, static_cast<uint64_t>(i)});
      EpisodeDriver driver(make_env(cfg_.env_kind, 100000 + static_cast<uint64_t>(i), opts), vocab_,
                           cfg_.env_max_turns);
      const uint64_t key = rng::mix({val_seed, 0x6b6579ULL, static_cast<uint64_t>(i)});
      ActorFn actor = [&](std::span<const int> ctx) {
        std::vector<double> lps;
        auto toks = greedy_action(params, ctx, &lps, val_seed, key);
        return std::make_pair(toks, lps);
      };
      SampleRecord rec = run_episode(driver, actor, "val-" + std::to_string(i));
      successes += meta_double(rec, "success");
      effective += meta_double(rec, "effective_actions");
      turns += meta_double(rec, "turns");
    }
    record.val_success_rate = successes / std::max(1, cfg_.validation_episodes);
    record.val_effective_rate = turns > 0 ? effective / turns : 0.0;
  } else {
    rng::Stream stream(val_seed);
    double correct = 0.0;
    const int n = cfg_.validation_episodes;
    for (int i = 0; i < n; ++i) {
      const TaskRecord& task = sampler_->draw(stream);
      SampleRecord rec;
      rec.sample_id = "val-" + std::to_string(i);
      rec.prompt_tokens = vocab_.tokenize(task.prompt);
      rec.response_tokens =
          greedy_action(params, rec.prompt_tokens, nullptr, val_seed, rng::hash_str(rec.sample_id));
      const std::string text = vocab_.detokenize(rec.response_tokens);
      if (!task.gold_answer.empty()) {
        const bool math = task.domain_tag == "math";
        correct += (math ? verify_math(text, task.gold_answer) : verify_general(text, task.gold_answer))
                       .accuracy;
      } else {
        SandboxProgram prog;
        prog.source = extract_answer_span(text).value_or("");
        for (const auto& jc : json::parse(task.tests_json)) {
          SandboxCase tc;
          tc.expected = jc.at("expected").get<int64_t>();
          for (const auto& [name, value] : jc.at("inputs").items()) tc.inputs[name] = value.get<int64_t>();
          prog.test_cases.push_back(std::move(tc));
        }
        correct += run_sandbox(prog).accuracy;
      }
    }
    record.val_accuracy = correct / std::max(1, n);
  }
}

// ---------------------------------------------------------------------------
// Run loop

void PipelineRunner::save_step_checkpoint(int step) {
  RunCheckpoint ckpt;
  ckpt.config_hash = cfg_.config_hash();
  ckpt.step = static_cast<uint64_t>(step);
  ckpt.train_params = export_params(cluster("actor_train"), 0);
  ckpt.counters["cumulative_tokens"] = cumulative_tokens_;
  ckpt.counters["cumulative_wasted"] = cumulative_wasted_;
  ckpt.counters["request_counter"] = request_counter_;
  save_checkpoint(ckpt, cfg_.output_dir + "/checkpoints/step_" + std::to_string(step) + ".ckpt");
}

RunResult PipelineRunner::run() {
  warmup();
  copy_params(cluster("actor_train"), cluster("actor_infer"));
  copy_params(cluster("actor_train"), cluster("reference"));
  return run_steps(1);
}

RunResult PipelineRunner::resume(const RunCheckpoint& ckpt) {
  if (ckpt.config_hash != cfg_.config_hash())
    throw ConfigError("resume: checkpoint config hash does not match this configuration");
  warmup();  // rebuilds the post-warmup reference deterministically
  copy_params(cluster("actor_train"), cluster("reference"));
  import_params(cluster("actor_train"), ckpt.train_params);
  import_params(cluster("actor_infer"), ckpt.train_params);
  cumulative_tokens_ = ckpt.counters.count("cumulative_tokens") ? ckpt.counters.at("cumulative_tokens") : 0;
  cumulative_wasted_ = ckpt.counters.count("cumulative_wasted") ? ckpt.counters.at("cumulative_wasted") : 0;
  request_counter_ = ckpt.counters.count("request_counter") ? ckpt.counters.at("request_counter") : 0;
  return run_steps(static_cast<int>(ckpt.step) + 1);
}

RunResult PipelineRunner::run_steps(int first_step) {
  RunResult result;
  for (int step = first_step; step <= cfg_.total_steps; ++step) {
    StepOutput out;
    try {
      out = generation_stage(step);
      last_batch_ = out.batch;
      inference_stage(step, out.batch);
      const UpdateStats stats = training_stage(step, out.batch);
      out.metrics.loss = stats.loss;
      out.metrics.mean_ratio = stats.mean_ratio;
      out.metrics.clip_fraction = stats.clip_fraction;
      out.metrics.mean_kl = stats.mean_kl;
    } catch (const Error& e) {
      // Step failed: halt with a resumable checkpoint at the last
      // completed step.
      RM_ERROR("step " << step << " failed: " << e.what());
      save_step_checkpoint(step - 1);
      result.halted_early = true;
      result.halt_reason = e.what();
      result.last_step = step - 1;
      flush_events();
      return result;
    }
    if (cfg_.validate_every > 0 && step % cfg_.validate_every == 0) run_validation(out.metrics);
    append_metrics(out.metrics);
    result.metrics.push_back(out.metrics);
    result.last_step = step;
    flush_events();
    if (cfg_.checkpoint_every > 0 && step % cfg_.checkpoint_every == 0) save_step_checkpoint(step);
  }
  return result;
}

RunResult run_pipeline(const RunConfig& config) {
  PipelineRunner runner(config);
  return runner.run();
}

RunResult resume_pipeline(const RunConfig& config, const std::string& checkpoint_path) {
  RunCheckpoint ckpt = load_checkpoint(checkpoint_path);
  PipelineRunner runner(config);
  return runner.resume(ckpt);
}

// ---------------------------------------------------------------------------
// Reporting

std::vector<MetricsRecord> load_metrics_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("report: cannot open '" + path + "'");
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(MetricsRecord::from_json(line));
  }
  return out;
}

namespace {

const std::vector<std::pair<std::string, double MetricsRecord::*>>& metric_fields() {
  static const std::vector<std::pair<std::string, double MetricsRecord::*>> fields = {
      {"success_rate", &MetricsRecord::success_rate},
      {"effective_action_rate", &MetricsRecord::effective_action_rate},
      {"avg_steps", &MetricsRecord::avg_steps},
      {"mean_reward", &MetricsRecord::mean_reward},
      {"accuracy", &MetricsRecord::accuracy},
      {"loss", &MetricsRecord::loss},
      {"mean_ratio", &MetricsRecord::mean_ratio},
      {"clip_fraction", &MetricsRecord::clip_fraction},
      {"mean_kl", &MetricsRecord::mean_kl},
  };
  return fields;
}

}  // namespace

MetricsSummary summarize_metrics(const std::vector<MetricsRecord>& records) {
  MetricsSummary summary;
  summary.records = records.size();
  if (records.empty()) return summary;
  for (const auto& [name, member] : metric_fields()) {
    MetricsSummary::Row row;
    row.name = name;
    row.min = row.max = records.front().*member;
    for (const auto& r : records) {
      row.min = std::min(row.min, r.*member);
      row.max = std::max(row.max, r.*member);
    }
    row.final_value = records.back().*member;
    summary.rows.push_back(row);
  }
  return summary;
}

std::string MetricsSummary::to_table() const {
  std::ostringstream os;
  os << "metric                    min         max         final\n";
  for (const auto& row : rows) {
    os << row.name;
    for (size_t i = row.name.size(); i < 24; ++i) os << ' ';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-12.5g%-12.5g%-12.5g", row.min, row.max, row.final_value);
    os << buf << '\n';
  }
  os << "records: " << records << '\n';
  return os.str();
}

std::string metrics_to_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream os;
  os << "step";
  for (const auto& [name, member] : metric_fields()) os << ',' << name;
  os << ",tokens_generated,tokens_wasted_aborted,wall_ticks\n";
  for (const auto& r : records) {
    os << r.step;
    for (const auto& [name, member] : metric_fields()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.10g", r.*member);
      os << ',' << buf;
    }
    os << ',' << r.tokens_generated << ',' << r.tokens_wasted_aborted << ',' << r.wall_ticks << '\n';
  }
  return os.str();
}

}  // namespace rollmini
