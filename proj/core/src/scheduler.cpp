// SPDX-License-Identifier: Apache-2.0
#include "rollmini/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "rollmini/errors.hpp"
#include "rollmini/log.hpp"
#include "rollmini/rewards.hpp"
#include "rollmini/rng.hpp"

namespace rollmini {

const char* to_string(RequestState state) {
  switch (state) {
    case RequestState::Queued: return "Queued";
    case RequestState::Generating: return "Generating";
    case RequestState::AwaitingEnv: return "AwaitingEnv";
    case RequestState::AwaitingReward: return "AwaitingReward";
    case RequestState::Completed: return "Completed";
    case RequestState::Aborted: return "Aborted";
  }
  return "?";
}

bool is_terminal(RequestState state) {
  return state == RequestState::Completed || state == RequestState::Aborted;
}

bool legal_transition(RequestState from, RequestState to) {
  if (is_terminal(from)) return false;
  if (to == RequestState::Aborted) return true;  // abort is legal from any live state
  switch (from) {
    case RequestState::Queued: return to == RequestState::Generating;
    case RequestState::Generating:
      return to == RequestState::AwaitingEnv || to == RequestState::AwaitingReward;
    case RequestState::AwaitingEnv:
      return to == RequestState::Generating || to == RequestState::AwaitingReward;
    case RequestState::AwaitingReward: return to == RequestState::Completed;
    default: return false;
  }
}

void QuotaSpec::validate() const {
  if (target_valid_prompts == 0) throw ConfigError("quota: target_valid_prompts must be positive");
  if (group_size == 0) throw ConfigError("quota: group_size must be positive");
  if (oversample_factor < 1.0) throw ConfigError("quota: oversample_factor must be >= 1");
}

void SchedulerConfig::validate() const {
  if (max_new_tokens_per_turn < 1) throw ConfigError("scheduler: max_new_tokens_per_turn must be >= 1");
  if (max_turns < 1) throw ConfigError("scheduler: max_turns must be >= 1");
  if (decode_interval_span == 0) throw ConfigError("scheduler: decode_interval_span must be positive");
  if (distinct_env_seeds == 0) throw ConfigError("scheduler: distinct_env_seeds must be positive");
}

std::vector<std::string> group_filter(
    const std::vector<std::pair<std::string, std::vector<double>>>& groups) {
  std::vector<std::string> retained;
  for (const auto& [gid, accuracies] : groups) {
    if (accuracies.empty()) throw InputError("group_filter: group '" + gid + "' is empty");
    const bool all_one = std::all_of(accuracies.begin(), accuracies.end(), [](double a) { return a == 1.0; });
    const bool all_zero = std::all_of(accuracies.begin(), accuracies.end(), [](double a) { return a == 0.0; });
    if (!all_one && !all_zero) retained.push_back(gid);
  }
  return retained;
}

RolloutScheduler::RolloutScheduler(SimClock& clock, EventLog& log, SchedulerConfig config,
                                   GenerationBackend& gen, EnvironmentBackend* env, RewardBackend* reward)
    : clock_(clock), log_(log), config_(std::move(config)), gen_(gen), env_(env), reward_(reward) {
  config_.validate();
  if (config_.max_turns > 1 && !env_)
    throw ConfigError("scheduler: multi-turn configuration requires an environment backend");
  for (int s = gen_.slots() - 1; s >= 0; --s) free_slots_.push_back(s);
}

RolloutScheduler::RequestCtx& RolloutScheduler::ctx(const std::string& request_id) {
  auto it = requests_.find(request_id);
  if (it == requests_.end()) throw LifecycleError("scheduler: unknown request '" + request_id + "'");
  return it->second;
}

const RolloutRequest& RolloutScheduler::request(const std::string& request_id) const {
  auto it = requests_.find(request_id);
  if (it == requests_.end()) throw LifecycleError("scheduler: unknown request '" + request_id + "'");
  return it->second.req;
}

void RolloutScheduler::log_transition(const RequestCtx& rc, RequestState from, RequestState to) {
  log_.emit({{"tick", std::to_string(clock_.now())},
             {"request_id", rc.req.request_id},
             {"group_id", rc.req.group_id},
             {"transition", std::string(to_string(from)) + "->" + to_string(to)},
             {"tokens", std::to_string(rc.req.tokens_generated)}});
}

void RolloutScheduler::transition(RequestCtx& rc, RequestState to) {
  const RequestState from = rc.req.state;
  if (!legal_transition(from, to))
    throw LifecycleError("scheduler: illegal transition " + std::string(to_string(from)) + "->" +
                         to_string(to) + " for request '" + rc.req.request_id + "'");
  rc.req.state = to;
  log_transition(rc, from, to);
}

std::string RolloutScheduler::submit(PromptSubmission submission) {
  if (draining_) throw LifecycleError("scheduler: draining, submission rejected");
  RequestCtx rc;
  rc.req.request_id = "r" + std::to_string(next_seq_);
  rc.req.submit_seq = next_seq_++;
  rc.req.sample_id = submission.sample_id.empty() ? rc.req.request_id : submission.sample_id;
  rc.req.group_id = submission.group_id.empty() ? "g-" + rc.req.request_id : submission.group_id;
  rc.req.domain_tag = submission.domain_tag;
  rc.prompt = std::move(submission.prompt_tokens);
  rc.meta = std::move(submission.meta);
  rc.decode_interval =
      1 + rng::mix({config_.seed, rng::hash_str(rc.req.request_id)}) % config_.decode_interval_span;

  const std::string id = rc.req.request_id;
  auto& group = groups_[rc.req.group_id];
  group.expected += 1;
  group.request_ids.push_back(id);

  ++stats_.admitted;
  requests_.emplace(id, std::move(rc));
  queue_.push_back(id);
  log_.emit({{"tick", std::to_string(clock_.now())},
             {"request_id", id},
             {"group_id", requests_.at(id).req.group_id},
             {"transition", "->Queued"},
             {"tokens", "0"}});
  pump();  // start generating immediately when a slot is free
  return id;
}

void RolloutScheduler::pump() {
  if (quota_met_) return;
  auto serve = [&](std::deque<std::string>& q, RequestState expected) {
    while (!free_slots_.empty() && !q.empty()) {
      const std::string id = q.front();
      q.pop_front();
      auto it = requests_.find(id);
      if (it == requests_.end() || it->second.req.state != expected) continue;
      RequestCtx& rc = it->second;
      rc.slot = free_slots_.back();
      free_slots_.pop_back();
      start_generating(rc);
    }
  };
  serve(resume_queue_, RequestState::AwaitingEnv);
  serve(queue_, RequestState::Queued);
}

void RolloutScheduler::start_generating(RequestCtx& rc) {
  if (rc.req.state == RequestState::Queued && env_) {
    const uint64_t instance_seed =
        config_.env_seed_base + episode_counter_ % config_.distinct_env_seeds;
    const uint64_t episode_seed = rng::mix({config_.seed, episode_counter_, 0x657069ULL});
    ++episode_counter_;
    rc.env_rank = static_cast<int>(env_rr_++ % static_cast<uint64_t>(env_->workers()));
    auto begin = env_->begin(rc.env_rank, rc.req, instance_seed, episode_seed);
    rc.prompt = std::move(begin.prompt_tokens);
    rc.env_live = true;
  }
  transition(rc, RequestState::Generating);
  rc.turn_start = rc.response.size();
  schedule_decode(rc);
}

void RolloutScheduler::schedule_decode(RequestCtx& rc) {
  const std::string id = rc.req.request_id;
  const uint64_t epoch = rc.epoch;
  clock_.schedule_after(rc.decode_interval, [this, id, epoch] { decode_event(id, epoch); });
}

void RolloutScheduler::decode_event(const std::string& request_id, uint64_t epoch) {
  auto it = requests_.find(request_id);
  if (it == requests_.end()) return;
  RequestCtx& rc = it->second;
  if (rc.epoch != epoch || rc.req.state != RequestState::Generating) return;  // stale

  std::vector<int> context = rc.prompt;
  context.insert(context.end(), rc.response.begin(), rc.response.end());
  const auto step = gen_.decode(rc.slot, context, rc.req.sample_id, rc.gen_position);
  rc.params_version = step.params_version;
  rc.response.push_back(step.token);
  rc.logprobs.push_back(step.logprob);
  rc.mask.push_back(1);
  ++rc.gen_position;
  ++rc.req.tokens_generated;
  ++stats_.tokens_generated_total;

  const bool stopped =
      std::find(config_.stop_tokens.begin(), config_.stop_tokens.end(), step.token) !=
      config_.stop_tokens.end();
  const size_t turn_len = rc.response.size() - rc.turn_start;
  if (stopped || turn_len >= static_cast<size_t>(config_.max_new_tokens_per_turn)) {
    turn_complete(rc);
  } else {
    schedule_decode(rc);
  }
}

void RolloutScheduler::turn_complete(RequestCtx& rc) {
  free_slots_.push_back(rc.slot);
  rc.slot = -1;
  if (env_) {
    transition(rc, RequestState::AwaitingEnv);
    const std::string id = rc.req.request_id;
    const uint64_t epoch = rc.epoch;
    clock_.schedule_after(config_.env_step_ticks, [this, id, epoch] { env_event(id, epoch); });
  } else {
    on_sample_complete(rc.req.request_id);
  }
  pump();
}

void RolloutScheduler::on_sample_complete(const std::string& request_id) {
  RequestCtx& rc = ctx(request_id);
  if (rc.req.state != RequestState::Generating && rc.req.state != RequestState::AwaitingEnv)
    throw LifecycleError("on_sample_complete: request '" + request_id + "' is in state " +
                         to_string(rc.req.state));
  if (rc.slot >= 0) {  // externally signaled while holding a slot
    free_slots_.push_back(rc.slot);
    rc.slot = -1;
  }
  transition(rc, RequestState::AwaitingReward);

  const uint64_t epoch = rc.epoch;
  if (rc.has_finished) {
    // Agentic episode: reward already folded into the trajectory; a short
    // finalize latency models the bookkeeping hop.
    clock_.schedule_after(config_.finalize_ticks,
                          [this, request_id, epoch] { reward_event(request_id, epoch); });
    return;
  }
  if (!reward_)
    throw LifecycleError("on_sample_complete: no reward backend for request '" + request_id + "'");
  const std::string domain = rc.req.domain_tag;
  const int worker =
      static_cast<int>(reward_rr_[domain]++ % static_cast<uint64_t>(reward_->workers(domain)));
  log_.emit({{"tick", std::to_string(clock_.now())},
             {"request_id", request_id},
             {"group_id", rc.req.group_id},
             {"event", "reward_dispatch"},
             {"worker", std::to_string(worker)}});
  clock_.schedule_after(reward_->latency_ticks(domain), [this, request_id, epoch, worker] {
    auto it = requests_.find(request_id);
    if (it == requests_.end()) return;
    RequestCtx& rc2 = it->second;
    if (rc2.epoch != epoch || rc2.req.state != RequestState::AwaitingReward) return;
    rc2.finished = reward_->compute(rc2.req.domain_tag, worker, snapshot_sample(rc2));
    rc2.has_finished = true;
    log_.emit({{"tick", std::to_string(clock_.now())},
               {"request_id", request_id},
               {"group_id", rc2.req.group_id},
               {"event", "reward_done"},
               {"worker", std::to_string(worker)}});
    complete(rc2, rc2.finished);
  });
}

void RolloutScheduler::env_event(const std::string& request_id, uint64_t epoch) {
  auto it = requests_.find(request_id);
  if (it == requests_.end()) return;
  RequestCtx& rc = it->second;
  if (rc.epoch != epoch || rc.req.state != RequestState::AwaitingEnv) return;

  std::span<const int> action(rc.response.data() + rc.turn_start, rc.response.size() - rc.turn_start);
  std::span<const double> lps(rc.logprobs.data() + rc.turn_start, rc.logprobs.size() - rc.turn_start);
  auto result = env_->step(rc.env_rank, request_id, action, lps);
  ++rc.turns;

  if (result.done) {
    rc.env_live = false;
    rc.finished = std::move(result.finalized);
    rc.has_finished = true;
    on_sample_complete(request_id);
    return;
  }
  for (int tok : result.obs_tokens) {
    rc.response.push_back(tok);
    rc.logprobs.push_back(0.0);
    rc.mask.push_back(0);
  }
  resume_queue_.push_back(request_id);
  pump();
}

void RolloutScheduler::reward_event(const std::string& request_id, uint64_t epoch) {
  auto it = requests_.find(request_id);
  if (it == requests_.end()) return;
  RequestCtx& rc = it->second;
  if (rc.epoch != epoch || rc.req.state != RequestState::AwaitingReward) return;
  complete(rc, rc.finished);
}

void RolloutScheduler::complete(RequestCtx& rc, SampleRecord finished) {
  finished.sample_id = rc.req.sample_id;
  finished.group_id = rc.req.group_id;
  if (finished.domain_tag.empty()) finished.domain_tag = rc.req.domain_tag;
  finished.meta["params_version"] = std::to_string(rc.params_version);
  rc.finished = std::move(finished);
  rc.has_finished = true;
  transition(rc, RequestState::Completed);
  ++stats_.completed;
  completion_order_.push_back(rc.req.request_id);
  group_done(rc.req.group_id);
}

void RolloutScheduler::group_done(const std::string& group_id) {
  auto it = groups_.find(group_id);
  if (it == groups_.end()) return;
  GroupInfo& g = it->second;
  if (g.resolved) return;
  size_t completed = 0;
  for (const auto& rid : g.request_ids)
    if (requests_.at(rid).req.state == RequestState::Completed) ++completed;
  if (completed < g.expected) return;

  bool retained = true;
  if (active_quota_ && active_quota_->filter_uniform) {
    std::vector<double> accuracies;
    for (const auto& rid : g.request_ids) accuracies.push_back(sample_accuracy(requests_.at(rid).finished));
    retained = !group_filter({{group_id, accuracies}}).empty();
  }
  g.resolved = true;
  g.retained = retained;
  g.completion_seq = next_group_seq_++;
  ++resolved_groups_;
  if (retained) {
    retained_order_.push_back(group_id);
    ++stats_.retained_groups;
    if (active_quota_ && !quota_met_ && retained_order_.size() >= active_quota_->target_valid_prompts)
      trigger_quota_met();
  } else {
    ++stats_.filtered_groups;
  }
  if (!quota_met_) {
    admit_on_demand();
    pump();
  }
}

void RolloutScheduler::admit_on_demand() {
  if (!active_quota_ || !source_ || source_exhausted_ || quota_met_) return;
  const size_t target = active_quota_->target_valid_prompts;
  const size_t remaining = target - std::min(target, retained_order_.size());
  // Keep enough groups in flight to cover the expected filter losses; the
  // oversample factor is the configured estimate of that rate.
  const auto want_active = static_cast<size_t>(
      std::ceil(static_cast<double>(remaining) * active_quota_->oversample_factor));
  while (admitted_groups_ < budget_groups_ && admitted_groups_ - resolved_groups_ < want_active) {
    auto group = source_->next_group();
    if (!group) {
      source_exhausted_ = true;
      return;
    }
    for (auto& submission : *group) submit(std::move(submission));
    ++admitted_groups_;
  }
}

bool RolloutScheduler::abort(const std::string& request_id) {
  RequestCtx& rc = ctx(request_id);
  if (is_terminal(rc.req.state)) return false;
  ++rc.epoch;  // cancels scheduled events
  if (rc.slot >= 0) {
    free_slots_.push_back(rc.slot);
    rc.slot = -1;
  }
  if (rc.env_live) {
    env_->abort(rc.env_rank, request_id);
    rc.env_live = false;
  }
  ++stats_.aborted;
  stats_.tokens_wasted_aborted += rc.req.tokens_generated;
  transition(rc, RequestState::Aborted);

  auto git = groups_.find(rc.req.group_id);
  if (git != groups_.end() && !git->second.resolved) {
    // The group can no longer complete; count it resolved so demand-driven
    // admission can replace it.
    git->second.resolved = true;
    ++resolved_groups_;
  }
  if (!quota_met_) {
    admit_on_demand();
    pump();
  }
  return true;
}

void RolloutScheduler::trigger_quota_met() {
  quota_met_ = true;
  draining_ = true;
  log_.emit({{"tick", std::to_string(clock_.now())}, {"event", "quota_met"}});
  if (!abort_enabled_) return;
  std::vector<std::string> live;
  for (const auto& [id, rc] : requests_)
    if (!is_terminal(rc.req.state)) live.push_back(id);
  // requests_ is an ordered map: deterministic abort order.
  for (const auto& id : live) abort(id);
}

SampleRecord RolloutScheduler::snapshot_sample(const RequestCtx& rc) const {
  SampleRecord rec;
  rec.sample_id = rc.req.sample_id;
  rec.group_id = rc.req.group_id;
  rec.domain_tag = rc.req.domain_tag;
  rec.prompt_tokens = rc.prompt;
  rec.response_tokens = rc.response;
  rec.response_logprobs = rc.logprobs;
  rec.action_mask.clear();  // single-turn responses are fully loss-participating
  rec.done = true;
  rec.meta = rc.meta;
  rec.meta["params_version"] = std::to_string(rc.params_version);
  return rec;
}

std::vector<SampleRecord> RolloutScheduler::completed_samples() const {
  std::vector<SampleRecord> out;
  for (const auto& id : completion_order_) out.push_back(requests_.at(id).finished);
  return out;
}

SampleBatch RolloutScheduler::run_until_quota(const QuotaSpec& quota, PromptSource* source,
                                              bool abort_requests) {
  quota.validate();
  active_quota_ = &quota;
  source_ = source;
  abort_enabled_ = abort_requests;
  budget_groups_ = static_cast<size_t>(
      std::ceil(quota.oversample_factor * static_cast<double>(quota.target_valid_prompts)));
  admitted_groups_ = groups_.size();  // pre-submitted groups count against the budget

  admit_on_demand();
  pump();

  if (abort_enabled_) {
    clock_.run_until([&] { return quota_met_; });
    clock_.run_all();  // drain events cancelled by the abort pass
  } else {
    clock_.run_all();
  }

  if (retained_order_.size() < quota.target_valid_prompts) {
    SampleBatch partial;
    for (const auto& gid : retained_order_)
      for (const auto& rid : groups_.at(gid).request_ids)
        partial.push_back(requests_.at(rid).finished);
    throw QuotaShortfall("run_until_quota: only " + std::to_string(retained_order_.size()) +
                             " retained groups of " + std::to_string(quota.target_valid_prompts) +
                             " required (admission budget " + std::to_string(budget_groups_) +
                             " groups exhausted)",
                         std::move(partial), stats_);
  }

  SampleBatch out;
  for (size_t gi = 0; gi < quota.target_valid_prompts; ++gi) {
    const GroupInfo& g = groups_.at(retained_order_[gi]);
    for (const auto& rid : g.request_ids) {
      const RequestCtx& rc = requests_.at(rid);
      if (rc.req.state != RequestState::Completed)
        throw LifecycleError("run_until_quota: retained group member not completed");
      out.push_back(rc.finished);
    }
  }
  return out;
}

}  // namespace rollmini
