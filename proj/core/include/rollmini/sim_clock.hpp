// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

namespace rollmini {

/// Deterministic discrete-event clock. Events fire in (tick, insertion
/// sequence) order, so identical schedules replay identically. All scheduler
/// asynchrony in this library is expressed in these integer ticks.
class SimClock {
 public:
  uint64_t now() const { return now_; }
  bool empty() const { return queue_.empty(); }
  size_t pending() const { return queue_.size(); }

  void schedule_at(uint64_t tick, std::function<void()> fn);
  void schedule_after(uint64_t delay, std::function<void()> fn) { schedule_at(now_ + delay, std::move(fn)); }

  /// Fires the next event; returns false when the queue is empty.
  bool step();

  /// Runs until the queue drains.
  void run_all();

  /// Runs until pred() is true or the queue drains; returns pred().
  bool run_until(const std::function<bool()>& pred);

  void reset(uint64_t tick = 0);

 private:
  struct Event {
    uint64_t tick;
    uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.tick != b.tick ? a.tick > b.tick : a.seq > b.seq;
    }
  };
  uint64_t now_ = 0;
  uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

/// Append-only structured event log. Entries are flat string->string maps
/// rendered as JSON lines; ordering assertions in tests and the
/// events.jsonl artifact both read from here.
class EventLog {
 public:
  using Entry = std::map<std::string, std::string>;

  void emit(Entry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  std::string to_jsonl() const;
  void append_to_file(const std::string& path, size_t from_index = 0) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace rollmini
