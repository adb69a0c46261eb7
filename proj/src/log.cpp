#include "item/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace item::log {

Level level() {
    static const Level cached = [] {
        const char* env = std::getenv("ITEM_LOG_LEVEL");
        if (!env) return Level::info;
        if (std::strcmp(env, "error") == 0) return Level::error;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        return Level::info;
    }();
    return cached;
}

namespace {

void emit(const char* tag, const std::string& message) {
    std::fprintf(stderr, "[%s] %s\n", tag, message.c_str());
}

} // namespace

void error(const std::string& message) { emit("error", message); }

void info(const std::string& message) {
    if (level() >= Level::info) emit("info", message);
}

void debug(const std::string& message) {
    if (level() >= Level::debug) emit("debug", message);
}

} // namespace item::log
