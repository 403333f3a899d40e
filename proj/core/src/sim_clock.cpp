// SPDX-License-Identifier: Apache-2.0
#include "rollmini/sim_clock.hpp"

#include <fstream>

#include <json.hpp>

#include "rollmini/errors.hpp"

namespace rollmini {

void SimClock::schedule_at(uint64_t tick, std::function<void()> fn) {
  if (tick < now_) tick = now_;
  queue_.push(Event{tick, next_seq_++, std::move(fn)});
}

bool SimClock::step() {
  if (queue_.empty()) return false;
  // top() yields a const ref; move the callable out via a copy of the
  // shared function object before popping.
  Event ev = queue_.top();
  queue_.pop();
  now_ = ev.tick;
  ev.fn();
  return true;
}

void SimClock::run_all() {
  while (step()) {
  }
}

bool SimClock::run_until(const std::function<bool()>& pred) {
  while (!pred()) {
    if (!step()) return pred();
  }
  return true;
}

void SimClock::reset(uint64_t tick) {
  now_ = tick;
  queue_ = {};
}

std::string EventLog::to_jsonl() const {
  std::string out;
  for (const auto& entry : entries_) {
    out += nlohmann::json(entry).dump();
    out += '\n';
  }
  return out;
}

void EventLog::append_to_file(const std::string& path, size_t from_index) const {
  std::ofstream os(path, std::ios::app);
  if (!os) throw ConfigError("event log: cannot open '" + path + "' for append");
  for (size_t i = from_index; i < entries_.size(); ++i) os << nlohmann::json(entries_[i]).dump() << '\n';
}

}  // namespace rollmini
