// SPDX-License-Identifier: Apache-2.0
#include "rollmini/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace rollmini {

namespace {

LogLevel parse_env_level() {
  const char* env = std::getenv("ROLLMINI_LOG_LEVEL");
  if (!env) return LogLevel::info;
  std::string v(env);
  if (v == "error") return LogLevel::error;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  if (v == "trace") return LogLevel::trace;
  return LogLevel::info;
}

std::atomic<int> g_level{static_cast<int>(parse_env_level())};
std::mutex g_write_mutex;

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "ERROR";
    case LogLevel::info: return "INFO";
    case LogLevel::debug: return "DEBUG";
    case LogLevel::trace: return "TRACE";
  }
  return "?";
}

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(g_level.load(std::memory_order_relaxed)); }

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level), std::memory_order_relaxed); }

namespace detail {

void log_write(LogLevel level, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_write_mutex);
  std::fprintf(stderr, "[%s] %s\n", level_name(level), msg.c_str());
}

}  // namespace detail

}  // namespace rollmini
