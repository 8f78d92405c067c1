#include "pulse/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace pulse::log {

namespace {

Level from_env() {
  const char* env = std::getenv("PULSE_LOG_LEVEL");
  if (env == nullptr) return Level::warn;
  const std::string v(env);
  if (v == "error") return Level::error;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  return Level::warn;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> slot{static_cast<int>(from_env())};
  return slot;
}

const char* tag(Level level) {
  switch (level) {
    case Level::error:
      return "error";
    case Level::warn:
      return "warn";
    case Level::info:
      return "info";
    case Level::debug:
      return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return static_cast<Level>(level_slot().load()); }
void set_threshold(Level level) { level_slot().store(static_cast<int>(level)); }
bool enabled(Level level) { return static_cast<int>(level) <= level_slot().load(); }

void write(Level level, std::string_view message) {
  if (!enabled(level)) return;
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  std::cerr << "[" << tag(level) << "] " << message << "\n";
}

}  // namespace pulse::log
