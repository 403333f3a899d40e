// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "rollmini/errors.hpp"
#include "rollmini/policy_workers.hpp"
#include "rollmini/rng.hpp"

using namespace rollmini;

namespace {

const Vocabulary& vocab() { return Vocabulary::standard(); }

PolicyLayout small_layout() { return PolicyLayout{Vocabulary::standard().size(), 4, 5, 8}; }

BindingPlan plan_for(std::initializer_list<std::pair<std::string, int>> roles) {
  BindingPlan plan;
  for (const auto& [role, world] : roles)
    for (int r = 0; r < world; ++r) plan.assignments[role].push_back({r, "g" + std::to_string(r % 2)});
  return plan;
}

SampleBatch training_batch(const PolicyParams& params, int n, uint64_t seed) {
  rng::Stream s(seed);
  SampleBatch batch;
  for (int i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.sample_id = "t" + std::to_string(i);
    for (int t = 0; t < 4; ++t)
      rec.prompt_tokens.push_back(static_cast<int>(s.next_below(static_cast<uint64_t>(params.layout.vocab_size))));
    for (int t = 0; t < 3; ++t)
      rec.response_tokens.push_back(static_cast<int>(s.next_below(static_cast<uint64_t>(params.layout.vocab_size))));
    batch.push_back(rec);
  }
  auto lps = forward_logprobs(params, batch);
  for (size_t i = 0; i < batch.size(); ++i) {
    batch.samples[i].response_logprobs = lps[i];
    batch.samples[i].ref_logprobs = lps[i];
    batch.samples[i].advantages.assign(3, 0.0);
    for (auto& a : batch.samples[i].advantages) a = 2.0 * s.next_double() - 1.0;
    batch.samples[i].rewards.assign(3, 0.0);
  }
  return batch;
}

}  // namespace

TEST_CASE("cluster train step equals the local dp update") {
  const auto L = small_layout();
  const auto initial = PolicyParams::init(L, 42);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  auto batch = training_batch(initial, 10, 9);

  Cluster train(Role::actor_train, 2, plan_for({{"actor_train", 2}}),
                policy_worker_factory(initial, vocab(), cfg));
  auto stats = cluster_train_step(train, batch, cfg);
  CHECK(stats.tokens == 30);

  PolicyParams local = initial;
  auto local_stats = ppo_update(local, batch, cfg, 2);
  CHECK(stats.loss == doctest::Approx(local_stats.loss).epsilon(1e-12));

  const auto remote = export_params(train, 0);
  CHECK(remote.version == local.version);
  REQUIRE(remote.values.size() == local.values.size());
  for (size_t i = 0; i < local.values.size(); ++i) CHECK(remote.values[i] == local.values[i]);

  // both ranks hold identical replicas
  const auto r0 = export_params(train, 0);
  const auto r1 = export_params(train, 1);
  CHECK(r0.values == r1.values);
}

TEST_CASE("dp equivalence across world sizes via real clusters") {
  const auto L = small_layout();
  const auto initial = PolicyParams::init(L, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  auto batch = training_batch(initial, 12, 77);

  std::vector<std::vector<double>> results;
  for (int world : {1, 2, 4}) {
    Cluster train(Role::actor_train, world, plan_for({{"actor_train", world}}),
                  policy_worker_factory(initial, vocab(), cfg));
    for (int step = 0; step < 10; ++step) cluster_train_step(train, batch, cfg);
    results.push_back(export_params(train, 0).values);
  }
  for (size_t w = 1; w < results.size(); ++w) {
    double max_abs = 0.0;
    for (size_t i = 0; i < results[0].size(); ++i)
      max_abs = std::max(max_abs, std::abs(results[0][i] - results[w][i]));
    CHECK(max_abs < 1e-6);
  }
}

TEST_CASE("sync_params is bit-identical for all bucket sizes and propagates versions") {
  const auto L = small_layout();
  const auto initial = PolicyParams::init(L, 8);
  TrainConfig cfg;

  for (size_t bucket : {size_t{1}, size_t{7}, size_t{256}, L.param_count()}) {
    Cluster train(Role::actor_train, 1, plan_for({{"actor_train", 1}}),
                  policy_worker_factory(initial, vocab(), cfg));
    Cluster infer(Role::actor_infer, 2, plan_for({{"actor_infer", 2}}),
                  policy_worker_factory(initial, vocab(), cfg));

    // drift the training replica first
    auto batch = training_batch(initial, 6, bucket);
    cluster_train_step(train, batch, cfg);
    const auto src = export_params(train, 0);

    sync_params(train, infer, bucket);
    for (int rank = 0; rank < 2; ++rank) {
      const auto dst = export_params(infer, rank);
      CHECK(dst.version == src.version);
      REQUIRE(dst.values.size() == src.values.size());
      bool identical = true;
      for (size_t i = 0; i < src.values.size(); ++i)
        identical = identical && std::memcmp(&dst.values[i], &src.values[i], sizeof(double)) == 0;
      CHECK(identical);
    }
  }
}

TEST_CASE("sync_params rejects layout mismatches and leaves the target untouched") {
  const auto L = small_layout();
  PolicyLayout other = L;
  other.hidden_dim += 1;
  TrainConfig cfg;

  Cluster train(Role::actor_train, 1, plan_for({{"actor_train", 1}}),
                policy_worker_factory(PolicyParams::init(L, 1), vocab(), cfg));
  Cluster infer(Role::actor_infer, 1, plan_for({{"actor_infer", 1}}),
                policy_worker_factory(PolicyParams::init(other, 1), vocab(), cfg));

  const auto before = export_params(infer, 0);
  CHECK_THROWS_AS(sync_params(train, infer, 64), SyncError);
  const auto after = export_params(infer, 0);
  CHECK(before.values == after.values);
  CHECK(before.version == after.version);
}

TEST_CASE("generate on infer cluster stamps the synced version") {
  const auto L = small_layout();
  const auto initial = PolicyParams::init(L, 3);
  TrainConfig cfg;
  Cluster train(Role::actor_train, 1, plan_for({{"actor_train", 1}}),
                policy_worker_factory(initial, vocab(), cfg));
  Cluster infer(Role::actor_infer, 1, plan_for({{"actor_infer", 1}}),
                policy_worker_factory(initial, vocab(), cfg));

  auto batch = training_batch(initial, 4, 5);
  cluster_train_step(train, batch, cfg);  // version 2 on train
  sync_params(train, infer, 16);
  CHECK(cluster_version(infer, 0) == 2);

  Message gen;
  gen.batch.push_back([] {
    SampleRecord rec;
    rec.sample_id = "v";
    rec.prompt_tokens = {1, 2, 3};
    return rec;
  }());
  gen.scalars["max_new_tokens"] = 3;
  gen.scalars["temperature"] = 1.0;
  gen.fields["seed"] = "11";
  auto out = collect(infer.dispatch("generate", gen, DispatchMode::shard), CollectOrder::by_rank);
  CHECK(out.samples[0].meta.at("params_version") == "2");
}

TEST_CASE("forward_logprobs via cluster matches local computation") {
  const auto L = small_layout();
  const auto initial = PolicyParams::init(L, 21);
  TrainConfig cfg;
  Cluster ref(Role::reference, 3, plan_for({{"reference", 3}}),
              policy_worker_factory(initial, vocab(), cfg));

  auto batch = training_batch(initial, 7, 31);
  auto out = cluster_forward_logprobs(ref, batch);
  auto local = forward_logprobs(initial, batch);
  REQUIRE(out.size() == batch.size());
  for (size_t i = 0; i < out.size(); ++i) {
    CHECK(out.samples[i].sample_id == batch.samples[i].sample_id);
    for (size_t t = 0; t < local[i].size(); ++t)
      CHECK(out.samples[i].ref_logprobs[t] == doctest::Approx(local[i][t]).epsilon(1e-12));
  }
}
