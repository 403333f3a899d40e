// SPDX-License-Identifier: Apache-2.0
#include "rollmini/cluster.hpp"

#include <sstream>

#include "rollmini/errors.hpp"
#include "rollmini/log.hpp"

namespace rollmini {

struct RankFuture::State {
  mutable std::mutex m;
  mutable std::condition_variable cv;
  bool ready = false;
  Message value;
  std::exception_ptr error;

  void resolve(Message v) {
    {
      std::lock_guard<std::mutex> lock(m);
      value = std::move(v);
      ready = true;
    }
    cv.notify_all();
  }
  void fail(std::exception_ptr e) {
    {
      std::lock_guard<std::mutex> lock(m);
      error = std::move(e);
      ready = true;
    }
    cv.notify_all();
  }
  void wait() const {
    std::unique_lock<std::mutex> lock(m);
    cv.wait(lock, [&] { return ready; });
  }
};

RankFuture::RankFuture() : state_(std::make_shared<State>()) {}

bool RankFuture::ready() const {
  std::lock_guard<std::mutex> lock(state_->m);
  return state_->ready;
}

Message RankFuture::get() const {
  state_->wait();
  if (state_->error) std::rethrow_exception(state_->error);
  return state_->value;
}

bool RankFuture::failed() const {
  state_->wait();
  return state_->error != nullptr;
}

std::string RankFuture::error_text() const {
  state_->wait();
  if (!state_->error) return {};
  try {
    std::rethrow_exception(state_->error);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

struct DispatchResult::CompletionLog {
  std::mutex m;
  std::condition_variable cv;
  std::vector<int> order;
  size_t expected = 0;

  void record(int rank) {
    {
      std::lock_guard<std::mutex> lock(m);
      order.push_back(rank);
    }
    cv.notify_all();
  }
  std::vector<int> wait_all() {
    std::unique_lock<std::mutex> lock(m);
    cv.wait(lock, [&] { return order.size() >= expected; });
    return order;
  }
};

std::vector<int> DispatchResult::completion_order() const {
  if (!completions_) return {};
  return completions_->wait_all();
}

struct Cluster::Mailbox {
  struct Task {
    std::string method;
    Message msg;
    std::shared_ptr<RankFuture::State> promise;
    std::shared_ptr<DispatchResult::CompletionLog> completions;
    int rank = 0;
  };
  std::mutex m;
  std::condition_variable cv;
  std::deque<Task> tasks;
  bool stop = false;

  void push(Task task) {
    {
      std::lock_guard<std::mutex> lock(m);
      tasks.push_back(std::move(task));
    }
    cv.notify_one();
  }
};

Cluster::Cluster(Role role, int world_size, const BindingPlan& plan, const WorkerFactory& factory,
                 const std::string& mapping_name)
    : Cluster(role, world_size, plan.for_role(mapping_name.empty() ? to_string(role) : mapping_name),
              factory) {}

Cluster::Cluster(Role role, int world_size, const std::vector<BindingAssignment>& assignment,
                 const WorkerFactory& factory)
    : role_(role), world_size_(world_size) {
  if (world_size <= 0) throw ConfigError("cluster: world_size must be positive");
  if (static_cast<int>(assignment.size()) < world_size)
    throw ConfigError(std::string("cluster: binding plan covers ") + std::to_string(assignment.size()) +
                      " ranks for role " + to_string(role) + ", need " + std::to_string(world_size));
  for (int r = 0; r < world_size; ++r) devices_.push_back(assignment[static_cast<size_t>(r)].device_id);

  try {
    for (int r = 0; r < world_size; ++r) {
      auto worker = factory(r, world_size, devices_[static_cast<size_t>(r)]);
      if (!worker) throw SpawnError("cluster: factory returned null worker");
      worker->rank = r;
      worker->world_size = world_size;
      worker->device_id = devices_[static_cast<size_t>(r)];
      workers_.push_back(std::move(worker));
    }
  } catch (const std::exception& e) {
    workers_.clear();  // torn down before any thread starts
    throw SpawnError(std::string("cluster spawn failed for role ") + to_string(role) + ": " + e.what());
  }

  for (int r = 0; r < world_size; ++r) mailboxes_.push_back(std::make_unique<Mailbox>());
  for (int r = 0; r < world_size; ++r) threads_.emplace_back([this, r] { worker_loop(r); });
  RM_DEBUG("spawned cluster role=" << to_string(role_) << " world_size=" << world_size_);
}

Cluster::~Cluster() { teardown(); }

void Cluster::teardown() {
  for (auto& mb : mailboxes_) {
    if (!mb) continue;
    {
      std::lock_guard<std::mutex> lock(mb->m);
      mb->stop = true;
    }
    mb->cv.notify_all();
  }
  for (auto& t : threads_)
    if (t.joinable()) t.join();
  threads_.clear();
}

const std::string& Cluster::device_of(int rank) const {
  if (rank < 0 || rank >= world_size_) throw ConfigError("cluster: rank out of range");
  return devices_[static_cast<size_t>(rank)];
}

void Cluster::worker_loop(int rank) {
  Mailbox& mb = *mailboxes_[static_cast<size_t>(rank)];
  Worker& worker = *workers_[static_cast<size_t>(rank)];
  for (;;) {
    Mailbox::Task task;
    {
      std::unique_lock<std::mutex> lock(mb.m);
      mb.cv.wait(lock, [&] { return mb.stop || !mb.tasks.empty(); });
      if (mb.stop && mb.tasks.empty()) return;
      task = std::move(mb.tasks.front());
      mb.tasks.pop_front();
    }
    try {
      Message reply = worker.call(task.method, task.msg);
      task.promise->resolve(std::move(reply));
    } catch (...) {
      // A failing call poisons only this rank's future.
      task.promise->fail(std::current_exception());
    }
    if (task.completions) task.completions->record(task.rank);
  }
}

DispatchResult Cluster::dispatch(const std::string& method, const Message& msg, DispatchMode mode) {
  const auto& allowed = methods_for_role(role_);
  if (!allowed.count(method))
    throw DispatchError(std::string("dispatch: method '") + method + "' not supported by role " +
                        to_string(role_));

  std::vector<Message> payloads;
  if (mode == DispatchMode::broadcast) {
    payloads.assign(static_cast<size_t>(world_size_), msg);
  } else {
    if (msg.batch.empty()) throw DispatchError("dispatch: shard mode requires a nonempty batch");
    auto chunks = split_batch(msg.batch, static_cast<size_t>(world_size_));
    payloads.resize(static_cast<size_t>(world_size_));
    for (int r = 0; r < world_size_; ++r) {
      payloads[static_cast<size_t>(r)] = msg;
      payloads[static_cast<size_t>(r)].batch = std::move(chunks[static_cast<size_t>(r)]);
    }
  }
  return dispatch_per_rank(method, std::move(payloads));
}

DispatchResult Cluster::dispatch_per_rank(const std::string& method, std::vector<Message> msgs) {
  const auto& allowed = methods_for_role(role_);
  if (!allowed.count(method))
    throw DispatchError(std::string("dispatch: method '") + method + "' not supported by role " +
                        to_string(role_));
  if (msgs.size() != static_cast<size_t>(world_size_))
    throw DispatchError("dispatch_per_rank: payload count != world_size");

  DispatchResult result;
  result.completions_ = std::make_shared<DispatchResult::CompletionLog>();
  result.completions_->expected = static_cast<size_t>(world_size_);
  for (int r = 0; r < world_size_; ++r) {
    RankFuture fut;
    Mailbox::Task task;
    task.method = method;
    task.msg = std::move(msgs[static_cast<size_t>(r)]);
    task.promise = fut.state_;
    task.completions = result.completions_;
    task.rank = r;
    mailboxes_[static_cast<size_t>(r)]->push(std::move(task));
    result.futures.push_back(std::move(fut));
  }
  return result;
}

RankFuture Cluster::dispatch_rank(int rank, const std::string& method, Message msg) {
  const auto& allowed = methods_for_role(role_);
  if (!allowed.count(method))
    throw DispatchError(std::string("dispatch: method '") + method + "' not supported by role " +
                        to_string(role_));
  if (rank < 0 || rank >= world_size_) throw DispatchError("dispatch_rank: rank out of range");
  RankFuture fut;
  Mailbox::Task task;
  task.method = method;
  task.msg = std::move(msg);
  task.promise = fut.state_;
  task.rank = rank;
  mailboxes_[static_cast<size_t>(rank)]->push(std::move(task));
  return fut;
}

Message Cluster::call_rank(int rank, const std::string& method, const Message& msg) {
  return dispatch_rank(rank, method, msg).get();
}

namespace {

void raise_failures(const DispatchResult& result) {
  std::vector<int> failed;
  std::ostringstream os;
  for (size_t r = 0; r < result.futures.size(); ++r) {
    if (result.futures[r].failed()) {
      failed.push_back(static_cast<int>(r));
      os << (failed.size() > 1 ? "; " : "") << "rank " << r << ": " << result.futures[r].error_text();
    }
  }
  if (!failed.empty()) throw CollectError("collect: " + std::to_string(failed.size()) + " rank(s) failed: " + os.str(), failed);
}

}  // namespace

SampleBatch collect(const DispatchResult& result, CollectOrder order) {
  raise_failures(result);
  std::vector<int> ranks;
  if (order == CollectOrder::by_rank) {
    for (size_t r = 0; r < result.futures.size(); ++r) ranks.push_back(static_cast<int>(r));
  } else {
    ranks = result.completion_order();
  }
  SampleBatch out;
  for (int r : ranks) {
    Message m = result.futures[static_cast<size_t>(r)].get();
    out.samples.insert(out.samples.end(), m.batch.samples.begin(), m.batch.samples.end());
  }
  return out;
}

std::vector<Message> collect_messages(const DispatchResult& result) {
  raise_failures(result);
  std::vector<Message> out;
  for (const auto& fut : result.futures) out.push_back(fut.get());
  return out;
}

}  // namespace rollmini
