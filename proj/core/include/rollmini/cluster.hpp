// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "rollmini/resource_pool.hpp"
#include "rollmini/worker.hpp"

namespace rollmini {

/// Future for one rank's method call. Resolves to a Message or an error.
class RankFuture {
 public:
  RankFuture();
  bool ready() const;
  Message get() const;  // blocks until resolved; rethrows worker errors
  bool failed() const;  // blocks until resolved
  std::string error_text() const;

 private:
  friend class Cluster;
  struct State;
  std::shared_ptr<State> state_;
};

enum class DispatchMode { broadcast, shard };
enum class CollectOrder { by_rank, completion };

/// Futures of one dispatch, exactly one per rank, plus the observed
/// completion order.
struct DispatchResult {
  std::vector<RankFuture> futures;
  std::vector<int> completion_order() const;  // blocks until all resolve

 private:
  friend class Cluster;
  struct CompletionLog;
  std::shared_ptr<CompletionLog> completions_;
};

/// A named group of parallel workers sharing one role. Each worker runs on
/// its own thread behind a mailbox; the controller exchanges immutable
/// Message values with it and never shares state.
class Cluster {
 public:
  /// Spawns world_size workers pinned to the given device slots. If the
  /// factory throws, already-spawned workers are torn down and a SpawnError
  /// is raised.
  Cluster(Role role, int world_size, const std::vector<BindingAssignment>& assignment,
          const WorkerFactory& factory);

  /// Looks the assignment up in the plan under mapping_name (defaults to
  /// the role name).
  Cluster(Role role, int world_size, const BindingPlan& plan, const WorkerFactory& factory,
          const std::string& mapping_name = "");
  ~Cluster();

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  Role role() const { return role_; }
  int world_size() const { return world_size_; }
  const std::string& device_of(int rank) const;

  /// Non-blocking. broadcast sends the full message to every rank; shard
  /// splits msg.batch into contiguous chunks (sizes differ by <= 1, larger
  /// first) and sends chunk r to rank r. Unknown methods are rejected
  /// before any worker sees them.
  DispatchResult dispatch(const std::string& method, const Message& msg, DispatchMode mode);

  /// Non-blocking; per-rank payloads (msgs.size() must equal world_size).
  DispatchResult dispatch_per_rank(const std::string& method, std::vector<Message> msgs);

  /// Non-blocking; single-rank call.
  RankFuture dispatch_rank(int rank, const std::string& method, Message msg);

  /// Synchronous single-rank round trip.
  Message call_rank(int rank, const std::string& method, const Message& msg);

 private:
  struct Mailbox;
  void worker_loop(int rank);
  void teardown();

  Role role_;
  int world_size_;
  std::vector<std::string> devices_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::unique_ptr<Mailbox>> mailboxes_;
  std::vector<std::thread> threads_;
};

/// Joins all futures. by_rank concatenates batches in rank order;
/// completion concatenates in completion order. Any failed rank raises a
/// CollectError naming every failed rank.
SampleBatch collect(const DispatchResult& result, CollectOrder order);

/// collect() variant returning the full reply messages in rank order.
std::vector<Message> collect_messages(const DispatchResult& result);

}  // namespace rollmini
