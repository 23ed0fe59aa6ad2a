#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

// Verbosity comes from the MAVE_LOG environment variable
// (debug|info|warn|error, default warn). Logs go to stderr only, so command
// output files and stdout stay byte-deterministic.

namespace mave::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("MAVE_LOG");
    if (!env) return Level::warn;
    const std::string_view v(env);
    if (v == "debug") return Level::debug;
    if (v == "info") return Level::info;
    if (v == "error") return Level::error;
    return Level::warn;
  }();
  return level;
}

inline void emit(Level level, std::string_view tag, std::string_view message) {
  if (level < threshold()) return;
  std::cerr << "[" << tag << "] " << message << "\n";
}

inline void debug(std::string_view m) { emit(Level::debug, "debug", m); }
inline void info(std::string_view m) { emit(Level::info, "info", m); }
inline void warn(std::string_view m) { emit(Level::warn, "warn", m); }
inline void error(std::string_view m) { emit(Level::error, "error", m); }

}  // namespace mave::log
