#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace erp {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Level comes from ERP_LOG_LEVEL (error|warn|info|debug); unset or
/// unrecognized values fall back to warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ERP_LOG_LEVEL");
    if (env == nullptr) return LogLevel::warn;
    std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "warn") return LogLevel::warn;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    std::fprintf(stderr, "[warn] unknown ERP_LOG_LEVEL '%s', using warn\n", env);
    return LogLevel::warn;
  }();
  return level;
}

inline void log_at(LogLevel level, const char* tag, const std::string& message) {
  if (level <= log_level())
    std::fprintf(stderr, "[%s] %s\n", tag, message.c_str());
}

inline void log_error(const std::string& m) { log_at(LogLevel::error, "error", m); }
inline void log_warn(const std::string& m) { log_at(LogLevel::warn, "warn", m); }
inline void log_info(const std::string& m) { log_at(LogLevel::info, "info", m); }
inline void log_debug(const std::string& m) { log_at(LogLevel::debug, "debug", m); }

}  // namespace erp
