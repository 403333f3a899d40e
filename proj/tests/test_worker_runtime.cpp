// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <condition_variable>
#include <mutex>

#include "rollmini/cluster.hpp"
#include "rollmini/errors.hpp"
#include "rollmini/sim_clock.hpp"

using namespace rollmini;

namespace {

// Echo worker: tags each sample with its rank.
class EchoWorker : public Worker {
 public:
  Message call(const std::string& method, const Message& input) override {
    if (method == "env_begin") {
      Message out = input;
      for (auto& s : out.batch.samples) s.meta["rank"] = std::to_string(rank);
      return out;
    }
    if (method == "env_step") throw Error("simulated worker crash at rank " + std::to_string(rank));
    return input;
  }
};

// Gate worker: blocks until released; used to control completion order
// without wall-clock sleeps.
class GateWorker : public Worker {
 public:
  struct Gates {
    std::mutex m;
    std::condition_variable cv;
    std::vector<bool> open;
  };

  explicit GateWorker(std::shared_ptr<Gates> gates) : gates_(std::move(gates)) {}

  Message call(const std::string&, const Message& input) override {
    std::unique_lock<std::mutex> lock(gates_->m);
    gates_->cv.wait(lock, [&] { return gates_->open[static_cast<size_t>(rank)]; });
    Message out = input;
    for (auto& s : out.batch.samples) s.meta["rank"] = std::to_string(rank);
    return out;
  }

 private:
  std::shared_ptr<Gates> gates_;
};

void release(std::shared_ptr<GateWorker::Gates>& gates, int rank) {
  {
    std::lock_guard<std::mutex> lock(gates->m);
    gates->open[static_cast<size_t>(rank)] = true;
  }
  gates->cv.notify_all();
}

BindingPlan plan_for(const std::string& role, int world) {
  BindingPlan plan;
  for (int r = 0; r < world; ++r)
    plan.assignments[role].push_back({r, "d" + std::to_string(r % 2)});
  return plan;
}

SampleBatch numbered(int n) {
  SampleBatch batch;
  for (int i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.sample_id = "s" + std::to_string(i);
    batch.push_back(rec);
  }
  return batch;
}

WorkerFactory echo_factory() {
  return [](int, int, const std::string&) { return std::make_unique<EchoWorker>(); };
}

}  // namespace

TEST_CASE("spawn assigns contiguous ranks and device slots") {
  Cluster cluster(Role::environment, 3, plan_for("environment", 3), echo_factory());
  CHECK(cluster.world_size() == 3);
  CHECK(cluster.device_of(0) == "d0");
  CHECK(cluster.device_of(1) == "d1");
  CHECK(cluster.device_of(2) == "d0");
}

TEST_CASE("factory failure tears down partial spawns") {
  std::atomic<int> live{0};
  class Counting : public Worker {
   public:
    explicit Counting(std::atomic<int>& live) : live_(live) { ++live_; }
    ~Counting() override { --live_; }
    Message call(const std::string&, const Message& input) override { return input; }

   private:
    std::atomic<int>& live_;
  };
  auto factory = [&](int rank, int, const std::string&) -> std::unique_ptr<Worker> {
    if (rank == 1) throw Error("boom at rank 1");
    return std::make_unique<Counting>(live);
  };
  CHECK_THROWS_AS(Cluster(Role::environment, 4, plan_for("environment", 4), factory), SpawnError);
  CHECK(live.load() == 0);
}

TEST_CASE("broadcast sends the full batch to every rank") {
  Cluster cluster(Role::environment, 3, plan_for("environment", 3), echo_factory());
  Message msg;
  msg.batch = numbered(5);
  auto result = cluster.dispatch("env_begin", msg, DispatchMode::broadcast);
  auto replies = collect_messages(result);
  REQUIRE(replies.size() == 3);
  for (const auto& reply : replies) CHECK(reply.batch.size() == 5);
}

TEST_CASE("shard splits contiguously and by_rank collect restores order") {
  Cluster cluster(Role::environment, 4, plan_for("environment", 4), echo_factory());
  Message msg;
  msg.batch = numbered(10);
  auto result = cluster.dispatch("env_begin", msg, DispatchMode::shard);
  auto replies = collect_messages(result);
  CHECK(replies[0].batch.size() == 3);
  CHECK(replies[1].batch.size() == 3);
  CHECK(replies[2].batch.size() == 2);
  CHECK(replies[3].batch.size() == 2);

  auto merged = collect(cluster.dispatch("env_begin", msg, DispatchMode::shard), CollectOrder::by_rank);
  REQUIRE(merged.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(merged.samples[static_cast<size_t>(i)].sample_id == "s" + std::to_string(i));
}

TEST_CASE("shard of an empty batch is rejected") {
  Cluster cluster(Role::environment, 2, plan_for("environment", 2), echo_factory());
  Message msg;
  CHECK_THROWS_AS(cluster.dispatch("env_begin", msg, DispatchMode::shard), DispatchError);
}

TEST_CASE("unknown and foreign methods are rejected before execution") {
  Cluster cluster(Role::reward, 2, plan_for("reward", 2), echo_factory());
  Message msg;
  msg.batch = numbered(2);
  // Training method on a reward cluster.
  CHECK_THROWS_AS(cluster.dispatch("compute_gradient", msg, DispatchMode::shard), DispatchError);
  CHECK_THROWS_AS(cluster.dispatch("no_such_method", msg, DispatchMode::broadcast), DispatchError);
}

TEST_CASE("a crashing worker poisons only its own future") {
  Cluster cluster(Role::environment, 3, plan_for("environment", 3), echo_factory());
  Message msg;
  msg.batch = numbered(6);
  auto result = cluster.dispatch("env_step", msg, DispatchMode::shard);  // EchoWorker throws
  try {
    collect(result, CollectOrder::by_rank);
    FAIL("expected collect error");
  } catch (const CollectError& e) {
    CHECK(e.failed_ranks == std::vector<int>{0, 1, 2});
  }

  // A mixed case: crash only on rank 1 via per-rank dispatch.
  std::vector<Message> msgs(3);
  msgs[0].batch = numbered(1);
  msgs[2].batch = numbered(1);
  auto mixed = cluster.dispatch_per_rank("env_begin", std::move(msgs));
  CHECK(!mixed.futures[0].failed());
  CHECK(!mixed.futures[1].failed());
  CHECK(!mixed.futures[2].failed());

  auto crash_one = cluster.dispatch_rank(1, "env_step", Message{});
  CHECK(crash_one.failed());
  // Sibling still serves requests afterwards.
  auto after = cluster.call_rank(0, "env_begin", Message{});
  CHECK(after.batch.empty());
}

TEST_CASE("dispatch is non-blocking across clusters") {
  auto gates = std::make_shared<GateWorker::Gates>();
  gates->open.assign(2, false);
  Cluster slow(Role::environment, 2, plan_for("environment", 2),
               [&](int, int, const std::string&) { return std::make_unique<GateWorker>(gates); });
  Cluster fast(Role::reward, 2, plan_for("reward", 2), echo_factory());

  Message msg;
  msg.batch = numbered(4);
  auto pending = slow.dispatch("env_begin", msg, DispatchMode::shard);
  CHECK(!pending.futures[0].ready());

  // Second dispatch to another cluster completes while the first is gated.
  auto done = collect(fast.dispatch("compute_reward", msg, DispatchMode::shard), CollectOrder::by_rank);
  CHECK(done.size() == 4);
  CHECK(!pending.futures[0].ready());

  release(gates, 0);
  release(gates, 1);
  CHECK(collect(pending, CollectOrder::by_rank).size() == 4);
}

TEST_CASE("completion-order collect follows simulated latencies") {
  // Simulated latencies 5, 1, 3 for ranks 0, 1, 2: the deterministic clock
  // releases rank gates in latency order, so completion order is 1, 2, 0.
  auto gates = std::make_shared<GateWorker::Gates>();
  gates->open.assign(3, false);
  Cluster cluster(Role::environment, 3, plan_for("environment", 3),
                  [&](int, int, const std::string&) { return std::make_unique<GateWorker>(gates); });

  Message msg;
  msg.batch = numbered(3);
  auto result = cluster.dispatch("env_begin", msg, DispatchMode::shard);

  const std::vector<uint64_t> latency = {5, 1, 3};
  SimClock clock;
  for (int r = 0; r < 3; ++r) {
    clock.schedule_at(latency[static_cast<size_t>(r)], [&, r] {
      release(gates, r);
      // Wait for this rank to drain before advancing simulated time.
      result.futures[static_cast<size_t>(r)].get();
    });
  }
  clock.run_all();

  CHECK(result.completion_order() == std::vector<int>{1, 2, 0});
  auto by_completion = collect(result, CollectOrder::completion);
  CHECK(by_completion.samples[0].meta.at("rank") == "1");
  CHECK(by_completion.samples[1].meta.at("rank") == "2");
  CHECK(by_completion.samples[2].meta.at("rank") == "0");
}
