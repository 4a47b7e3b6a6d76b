#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace arl::log {

enum class Level { debug, info, warn, error, off };

inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::info};
  return level;
}

inline void set_level(Level l) { threshold().store(l); }

inline void write(Level l, std::string_view msg) {
  if (l < threshold().load()) return;
  static std::mutex mu;
  static constexpr std::string_view tags[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(mu);
  std::clog << '[' << tags[static_cast<int>(l)] << "] " << msg << '\n';
}

inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void error(std::string_view msg) { write(Level::error, msg); }

}  // namespace arl::log
