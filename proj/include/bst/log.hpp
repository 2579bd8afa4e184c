#pragma once

#include <string>

namespace bst::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();

void info(const std::string& message);
void warn(const std::string& message);
/// Emits the warning only the first time `key` is seen in this process.
void warn_once(const std::string& key, const std::string& message);

}  // namespace bst::log
