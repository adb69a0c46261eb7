#pragma once

#include <string>

namespace item::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Read once from ITEM_LOG_LEVEL (error|info|debug); defaults to info.
Level level();

void error(const std::string& message);
void info(const std::string& message);
void debug(const std::string& message);

} // namespace item::log
