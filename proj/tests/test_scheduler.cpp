// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "rollmini/rng.hpp"
#include "scheduler_support.hpp"

using namespace rollmini;
using namespace rollmini::testing;

namespace {

SchedulerConfig base_config(uint64_t seed = 1) {
  SchedulerConfig cfg;
  cfg.max_new_tokens_per_turn = 32;
  cfg.stop_tokens = {2};
  cfg.seed = seed;
  cfg.decode_interval_span = 10;
  return cfg;
}

PromptSubmission sub(const std::string& sample, const std::string& group, const std::string& domain = "math") {
  PromptSubmission s;
  s.prompt_tokens = {1};
  s.sample_id = sample;
  s.group_id = group;
  s.domain_tag = domain;
  return s;
}

}  // namespace

TEST_CASE("group_filter retains exactly the non-uniform groups") {
  // exhaustive over binary accuracy patterns for G <= 4
  for (size_t G = 1; G <= 4; ++G) {
    for (uint32_t bits = 0; bits < (1u << G); ++bits) {
      std::vector<double> acc;
      for (size_t k = 0; k < G; ++k) acc.push_back((bits >> k) & 1 ? 1.0 : 0.0);
      const bool uniform = bits == 0 || bits == (1u << G) - 1;
      const auto retained = group_filter({{"g", acc}});
      CHECK(retained.empty() == uniform);
    }
  }
  CHECK(group_filter({{"g", {1, 1, 1, 1}}}).empty());
  CHECK(group_filter({{"g", {0, 1, 0, 1}}}) == std::vector<std::string>{"g"});
  CHECK(group_filter({{"g", {0.5, 0.5}}}) == std::vector<std::string>{"g"});
  CHECK_THROWS_AS(group_filter({{"g", {}}}), InputError);
}

TEST_CASE("legal transition table") {
  using RS = RequestState;
  CHECK(legal_transition(RS::Queued, RS::Generating));
  CHECK(legal_transition(RS::Generating, RS::AwaitingEnv));
  CHECK(legal_transition(RS::Generating, RS::AwaitingReward));
  CHECK(legal_transition(RS::AwaitingEnv, RS::Generating));
  CHECK(legal_transition(RS::AwaitingEnv, RS::AwaitingReward));
  CHECK(legal_transition(RS::AwaitingReward, RS::Completed));
  for (RS from : {RS::Queued, RS::Generating, RS::AwaitingEnv, RS::AwaitingReward})
    CHECK(legal_transition(from, RS::Aborted));
  CHECK(!legal_transition(RS::Queued, RS::AwaitingReward));
  CHECK(!legal_transition(RS::Completed, RS::Generating));
  CHECK(!legal_transition(RS::Aborted, RS::Generating));
  CHECK(!legal_transition(RS::AwaitingReward, RS::Generating));
}

TEST_CASE("submit assigns monotone sequence numbers and drain rejects") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(2);
  ScriptedReward reward;
  RolloutScheduler sched(clock, log, base_config(), gen, nullptr, &reward);

  const auto r0 = sched.submit(sub("a", "g0"));
  const auto r1 = sched.submit(sub("b", "g0"));
  const auto r2 = sched.submit(sub("c", "g1"));
  CHECK(sched.request(r0).submit_seq == 0);
  CHECK(sched.request(r1).submit_seq == 1);
  CHECK(sched.request(r2).submit_seq == 2);
  // two generation slots: the third submission waits in the queue
  CHECK(sched.request(r0).state == RequestState::Generating);
  CHECK(sched.request(r2).state == RequestState::Queued);

  // G=8 group admission shares the group id
  for (int k = 0; k < 8; ++k) sched.submit(sub("g8-" + std::to_string(k), "g8"));
  CHECK(sched.stats().admitted == 11);

  sched.drain();
  CHECK_THROWS_AS(sched.submit(sub("late", "g9")), LifecycleError);
}

TEST_CASE("quota run returns the first target groups by completion order and aborts the rest") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(4);
  // varied lengths so completion order differs from submit order
  gen.length_for = [](const std::string& sid) { return 2 + rng::mix({rng::hash_str(sid)}) % 12; };
  ScriptedReward reward;
  // alternate accuracies inside each group: every group is informative, the
  // filter is the identity
  reward.accuracy_for = [](const SampleRecord& s) {
    return s.sample_id.back() == '0' ? 0.0 : 1.0;
  };
  RolloutScheduler sched(clock, log, base_config(3), gen, nullptr, &reward);

  for (int g = 0; g < 12; ++g)
    for (int k = 0; k < 2; ++k)
      sched.submit(sub("g" + std::to_string(g) + "-" + std::to_string(k), "grp" + std::to_string(g)));

  QuotaSpec quota{4, 2, 3.0, true};
  auto batch = sched.run_until_quota(quota, nullptr, true);
  batch.validate();
  CHECK(batch.size() == 8);  // target x G
  for (const auto& s : batch.samples) {
    CHECK(s.scalar_reward.has_value());
    CHECK(s.meta.at("params_version") == "7");
  }

  const auto& st = sched.stats();
  CHECK(st.retained_groups == 4);
  CHECK(st.aborted > 0);
  CHECK(st.admitted == st.completed + st.aborted);  // nothing in flight after the run

  // abort leakage: no returned sample belongs to an aborted request
  const auto audit = audit_event_log(log);
  for (const auto& s : batch.samples) {
    bool in_aborted = false;
    for (const auto& id : audit.aborted_ids)
      if (sched.request(id).sample_id == s.sample_id) in_aborted = true;
    CHECK(!in_aborted);
  }
}

TEST_CASE("uniform-accuracy groups produce a quota shortfall carrying partials") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(2);
  ScriptedReward reward;
  reward.accuracy_for = [](const SampleRecord&) { return 1.0; };  // all ones
  RolloutScheduler sched(clock, log, base_config(5), gen, nullptr, &reward);

  CountingSource source(100, 2);  // budget-limited by the scheduler
  QuotaSpec quota{4, 2, 2.0, true};
  try {
    sched.run_until_quota(quota, &source, true);
    FAIL("expected shortfall");
  } catch (const QuotaShortfall& e) {
    CHECK(e.partial_results.empty());
    CHECK(e.stats.filtered_groups == 8);  // ceil(2.0 * 4) admitted groups, all filtered
    CHECK(e.stats.retained_groups == 0);
  }
  CHECK(source.produced() == 8);  // admission budget respected
}

TEST_CASE("dynamic sampling admits replacement groups on demand") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(2);
  ScriptedReward reward;
  // first three groups uniform-1 (filtered), later groups informative
  reward.accuracy_for = [](const SampleRecord& s) {
    const int g = std::stoi(s.group_id.substr(3));
    if (g < 3) return 1.0;
    return s.sample_id.back() == '0' ? 0.0 : 1.0;
  };
  SchedulerConfig cfg = base_config(7);
  cfg.decode_interval_span = 1;  // completion follows submission order
  RolloutScheduler sched(clock, log, cfg, gen, nullptr, &reward);

  CountingSource source(100, 2);
  QuotaSpec quota{3, 2, 4.0, true};
  auto batch = sched.run_until_quota(quota, &source, true);
  CHECK(batch.size() == 6);
  CHECK(sched.stats().filtered_groups == 3);
  CHECK(sched.stats().retained_groups == 3);
  CHECK(source.produced() >= 6);  // three filtered groups were replaced
}

TEST_CASE("async reward: a fast sample's reward dispatch precedes any other completion") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(100);
  gen.length_for = [](const std::string& sid) { return sid == "fast" ? size_t{1} : size_t{30}; };
  ScriptedReward reward;
  SchedulerConfig cfg = base_config(11);
  cfg.decode_interval_span = 1;  // uniform 1-tick decodes
  RolloutScheduler sched(clock, log, cfg, gen, nullptr, &reward);

  sched.submit(sub("fast", "gfast"));
  for (int i = 0; i < 99; ++i) sched.submit(sub("slow" + std::to_string(i), "gs" + std::to_string(i)));

  QuotaSpec quota{100, 1, 1.0, false};
  auto batch = sched.run_until_quota(quota, nullptr, true);
  CHECK(batch.size() == 100);

  size_t fast_dispatch = 0, first_other_completion = 0;
  const auto& entries = log.entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.count("event") && e.at("event") == "reward_dispatch" && !fast_dispatch) {
      // the first reward dispatch in the log must be the fast sample's
      CHECK(sched.request(e.at("request_id")).sample_id == "fast");
      fast_dispatch = i + 1;
    }
    if (!first_other_completion && e.count("transition") &&
        e.at("transition") == "Generating->AwaitingReward" &&
        sched.request(e.at("request_id")).sample_id != "fast")
      first_other_completion = i + 1;
  }
  REQUIRE(fast_dispatch > 0);
  REQUIRE(first_other_completion > 0);
  CHECK(fast_dispatch < first_other_completion);
}

TEST_CASE("on_sample_complete guards its preconditions") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(1);
  gen.length_for = [](const std::string&) { return 100; };  // never finishes alone
  ScriptedReward reward;
  SchedulerConfig cfg = base_config(13);
  cfg.max_new_tokens_per_turn = 200;
  RolloutScheduler sched(clock, log, cfg, gen, nullptr, &reward);

  const auto generating = sched.submit(sub("x", "gx"));  // takes the only slot
  const auto queued = sched.submit(sub("y", "gy"));
  CHECK(sched.request(queued).state == RequestState::Queued);
  CHECK_THROWS_AS(sched.on_sample_complete(queued), LifecycleError);  // still Queued
  CHECK_THROWS_AS(sched.on_sample_complete("r404"), LifecycleError);

  // signal generation completion externally
  sched.on_sample_complete(generating);
  CHECK(sched.request(generating).state == RequestState::AwaitingReward);
  CHECK_THROWS_AS(sched.on_sample_complete(generating), LifecycleError);  // double signal

  clock.run_all();
  CHECK(sched.request(generating).state == RequestState::Completed);
}

TEST_CASE("abort semantics: queued true, completed false, tokens accounted") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(1);
  gen.length_for = [](const std::string&) { return 6; };
  ScriptedReward reward;
  RolloutScheduler sched(clock, log, base_config(17), gen, nullptr, &reward);

  const auto queued = sched.submit(sub("q", "gq"));
  CHECK(sched.abort(queued));
  CHECK(sched.request(queued).state == RequestState::Aborted);
  CHECK(!sched.abort(queued));  // terminal

  const auto live = sched.submit(sub("live", "gl"));
  QuotaSpec quota{1, 1, 2.0, false};
  auto batch = sched.run_until_quota(quota, nullptr, false);
  CHECK(batch.size() == 1);
  CHECK(!sched.abort(live));  // completed
  CHECK(sched.stats().tokens_wasted_aborted == 0);  // queued request had no tokens
  CHECK(sched.stats().aborted == 1);
}

TEST_CASE("paired runs: aborting surplus work strictly reduces generated tokens (20 seeds)") {
  auto run_once = [](uint64_t seed, bool abort_enabled) {
    SimClock clock;
    EventLog log;
    ScriptedGen gen(3);
    gen.length_for = [seed](const std::string& sid) {
      return 3 + rng::mix({seed, rng::hash_str(sid)}) % 14;
    };
    ScriptedReward reward;
    // one correct and one incorrect member per group: every group is
    // informative, so the trigger fires with plenty of work in flight
    reward.accuracy_for = [](const SampleRecord& s) {
      return s.sample_id.back() == '0' ? 0.0 : 1.0;
    };
    SchedulerConfig cfg = base_config(seed);
    RolloutScheduler sched(clock, log, cfg, gen, nullptr, &reward);
    CountingSource source(1000, 2);
    QuotaSpec quota{4, 2, 3.0, true};
    auto batch = sched.run_until_quota(quota, &source, abort_enabled);
    REQUIRE(batch.size() == 8);
    audit_event_log(log);
    return sched.stats();
  };

  for (uint64_t seed = 100; seed < 120; ++seed) {
    const auto with_abort = run_once(seed, true);
    const auto without_abort = run_once(seed, false);
    CHECK(with_abort.tokens_generated_total < without_abort.tokens_generated_total);
    CHECK(with_abort.tokens_wasted_aborted > 0);
    CHECK(without_abort.tokens_wasted_aborted == 0);
    CHECK(without_abort.aborted == 0);
  }
}

TEST_CASE("randomized lifecycle runs stay legal and keep counter identities") {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    SimClock clock;
    EventLog log;
    ScriptedGen gen(1 + seed % 4);
    gen.length_for = [seed](const std::string& sid) {
      return 1 + rng::mix({seed, rng::hash_str(sid)}) % 9;
    };
    ScriptedReward reward;
    reward.worker_count = 1 + static_cast<int>(seed % 3);
    reward.accuracy_for = [seed](const SampleRecord& s) {
      return static_cast<double>(rng::mix({seed, rng::hash_str(s.sample_id)}) % 2);
    };
    RolloutScheduler sched(clock, log, base_config(seed), gen, nullptr, &reward);
    CountingSource source(64, 1 + seed % 3);
    QuotaSpec quota{3 + seed % 4, 1 + seed % 3, 2.0, seed % 2 == 0};
    SampleBatch batch;
    try {
      batch = sched.run_until_quota(quota, &source, true);
    } catch (const QuotaShortfall&) {
    }
    const auto audit = audit_event_log(log);
    const auto& st = sched.stats();
    CHECK(st.admitted == st.completed + st.aborted + st.in_flight());
    CHECK(st.in_flight() == 0);
    CHECK(audit.aborted_ids.size() == st.aborted);
    CHECK(audit.completed_ids.size() == st.completed);
    for (const auto& s : batch.samples) CHECK(s.meta.count("accuracy") == 1);
  }
}

TEST_CASE("agentic episodes interleave on the simulated clock") {
  SimClock clock;
  EventLog log;
  // One shared generation slot, two environment workers: while episode A
  // waits on its env step, the actor generates for episode B.
  ScriptedGen gen(1);
  gen.length_for = [](const std::string&) { return 3; };
  ScriptedEnv env(2);
  env.turns_for = [](const std::string&) { return 3; };
  SchedulerConfig cfg = base_config(23);
  cfg.decode_interval_span = 1;
  cfg.max_turns = 5;
  cfg.env_step_ticks = 6;
  RolloutScheduler sched(clock, log, cfg, gen, &env, nullptr);

  sched.submit(sub("epA", "gA", "agentic"));
  sched.submit(sub("epB", "gB", "agentic"));
  QuotaSpec quota{2, 1, 1.0, false};
  auto batch = sched.run_until_quota(quota, nullptr, false);
  CHECK(batch.size() == 2);
  for (const auto& s : batch.samples) {
    CHECK(s.meta.at("success") == "1");
    CHECK(s.done);
  }

  // while episode A awaits its env step, episode B generates: find a
  // generation transition of B strictly between two env-phase transitions
  // of A.
  const auto& entries = log.entries();
  auto id_of = [&](const std::string& sample) {
    for (const auto& e : entries)
      if (e.count("request_id") && sched.request(e.at("request_id")).sample_id == sample)
        return e.at("request_id");
    return std::string{};
  };
  const std::string a = id_of("epA"), b = id_of("epB");
  auto positions = [&](const std::string& id, const std::string& transition) {
    std::vector<size_t> out;
    for (size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.count("transition") && e.at("request_id") == id && e.at("transition") == transition)
        out.push_back(i);
    }
    return out;
  };
  auto has_between = [&](const std::vector<size_t>& fences, const std::vector<size_t>& points) {
    for (size_t i = 0; i + 1 < fences.size(); ++i)
      for (size_t p : points)
        if (p > fences[i] && p < fences[i + 1]) return true;
    return false;
  };
  const auto a_env = positions(a, "Generating->AwaitingEnv");
  const auto b_env = positions(b, "Generating->AwaitingEnv");
  REQUIRE(a_env.size() >= 2);
  const bool interleaved =
      has_between(a_env, positions(b, "AwaitingEnv->Generating")) ||
      has_between(b_env, positions(a, "AwaitingEnv->Generating"));
  CHECK(interleaved);
  audit_event_log(log);
}

TEST_CASE("slow reward lanes never delay other lanes") {
  SimClock clock;
  EventLog log;
  ScriptedGen gen(4);
  gen.length_for = [](const std::string&) { return 2; };
  ScriptedReward reward;
  reward.latency = {{"math", 1}, {"code", 500}};
  RolloutScheduler sched(clock, log, base_config(29), gen, nullptr, &reward);

  for (int i = 0; i < 4; ++i) sched.submit(sub("m" + std::to_string(i), "gm" + std::to_string(i), "math"));
  for (int i = 0; i < 4; ++i) sched.submit(sub("c" + std::to_string(i), "gc" + std::to_string(i), "code"));

  QuotaSpec quota{8, 1, 1.0, false};
  sched.run_until_quota(quota, nullptr, false);

  // every math completion happens before any code completion
  uint64_t last_math = 0, first_code = UINT64_MAX;
  for (const auto& e : log.entries()) {
    if (!e.count("transition") || e.at("transition") != "AwaitingReward->Completed") continue;
    const uint64_t tick = std::stoull(e.at("tick"));
    const std::string domain = sched.request(e.at("request_id")).domain_tag;
    if (domain == "math") last_math = std::max(last_math, tick);
    if (domain == "code") first_code = std::min(first_code, tick);
  }
  CHECK(last_math < first_code);
}
