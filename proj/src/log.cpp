#include "bst/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>

namespace bst::log {
namespace {

std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;

std::set<std::string>& seen_keys() {
  static std::set<std::string> keys;
  return keys;
}

void emit(Level at, const char* tag, const std::string& message) {
  if (at < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[bst " << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void info(const std::string& message) { emit(Level::kInfo, "info", message); }
void warn(const std::string& message) { emit(Level::kWarn, "warn", message); }

void warn_once(const std::string& key, const std::string& message) {
  {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (!seen_keys().insert(key).second) return;
  }
  warn(message);
}

}  // namespace bst::log
