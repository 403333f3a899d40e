// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <string>

namespace rollmini {

enum class LogLevel { error = 0, info = 1, debug = 2, trace = 3 };

/// Process-wide log threshold, initialized from ROLLMINI_LOG_LEVEL
/// (error|info|debug|trace; default info).
LogLevel log_level();
void set_log_level(LogLevel level);

namespace detail {
void log_write(LogLevel level, const std::string& msg);
}

}  // namespace rollmini

#define RM_LOG(level, expr)                                              \
  do {                                                                   \
    if (static_cast<int>(level) <= static_cast<int>(::rollmini::log_level())) { \
      std::ostringstream rm_log_os;                                      \
      rm_log_os << expr;                                                 \
      ::rollmini::detail::log_write(level, rm_log_os.str());             \
    }                                                                    \
  } while (0)

#define RM_ERROR(expr) RM_LOG(::rollmini::LogLevel::error, expr)
#define RM_INFO(expr) RM_LOG(::rollmini::LogLevel::info, expr)
#define RM_DEBUG(expr) RM_LOG(::rollmini::LogLevel::debug, expr)
#define RM_TRACE(expr) RM_LOG(::rollmini::LogLevel::trace, expr)
