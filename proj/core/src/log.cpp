#include "modechain/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace modechain {

namespace {
std::atomic<LogLevel> g_level{LogLevel::info};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

void log(LogLevel level, std::string_view message) {
  if (level < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_mutex);
  std::cerr << "[modechain " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace modechain
