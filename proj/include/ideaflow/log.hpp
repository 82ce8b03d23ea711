#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>

#include "ideaflow/error.hpp"

namespace ideaflow::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level parse_level(std::string_view s) {
  if (s == "error") return Level::Error;
  if (s == "warn" || s == "warning") return Level::Warn;
  if (s == "info") return Level::Info;
  if (s == "debug") return Level::Debug;
  throw ConfigError("IDEAFLOW_LOG: unknown level '" + std::string(s) + "' (use error, warn, info or debug)");
}

namespace detail {

struct State {
  Level level = Level::Warn;
  std::mutex mutex;
};

inline State& state() {
  static State s;
  return s;
}

inline std::string_view tag(Level l) {
  switch (l) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "?";
}

}  // namespace detail

inline void set_level(Level l) { detail::state().level = l; }
inline Level level() { return detail::state().level; }

// Reads IDEAFLOW_LOG; unset or empty keeps the default (warn).
inline void init_from_env() {
  const char* v = std::getenv("IDEAFLOW_LOG");
  if (v && *v) set_level(parse_level(v));
}

inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(level()); }

// Writes "[ideaflow level] message" to stderr. Never touches stdout, so
// machine-readable output stays clean.
inline void write(Level l, std::string_view msg) {
  if (!enabled(l)) return;
  std::lock_guard lock(detail::state().mutex);
  std::cerr << "[ideaflow " << detail::tag(l) << "] " << msg << '\n';
}

template <typename... Args>
void message(Level l, const Args&... args) {
  if (!enabled(l)) return;
  std::ostringstream ss;
  (ss << ... << args);
  write(l, ss.str());
}

template <typename... Args>
void error(const Args&... a) { message(Level::Error, a...); }
template <typename... Args>
void warn(const Args&... a) { message(Level::Warn, a...); }
template <typename... Args>
void info(const Args&... a) { message(Level::Info, a...); }
template <typename... Args>
void debug(const Args&... a) { message(Level::Debug, a...); }

}  // namespace ideaflow::log
