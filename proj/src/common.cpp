#include "quilt/common.hpp"

#include <cstdio>
#include <mutex>

namespace quilt::log {

Level level() {
    static const Level lvl = [] {
        const char* env = std::getenv("QUILT_LOG");
        if (env == nullptr) return Level::warn;
        const std::string v(env);
        if (v == "off") return Level::off;
        if (v == "warn") return Level::warn;
        if (v == "info") return Level::info;
        if (v == "debug") return Level::debug;
        return Level::warn;
    }();
    return lvl;
}

void write(Level lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(level())) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const char* tag = lvl == Level::warn ? "warn" : lvl == Level::info ? "info" : "debug";
    std::fprintf(stderr, "[quilt:%s] %s\n", tag, msg.c_str());
}

}  // namespace quilt::log
