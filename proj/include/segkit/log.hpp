#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace segkit {
namespace log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Threshold comes from SEG_LOG_LEVEL (error|warn|info|debug), read once.
inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("SEG_LOG_LEVEL");
        const std::string s = env ? env : "warn";
        if (s == "error") return Level::error;
        if (s == "info") return Level::info;
        if (s == "debug") return Level::debug;
        return Level::warn;
    }();
    return level;
}

inline void emit(Level level, const std::string& message) {
    if (level > threshold())
        return;
    static std::mutex mu;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

inline void error(const std::string& m) { emit(Level::error, m); }
inline void warn(const std::string& m) { emit(Level::warn, m); }
inline void info(const std::string& m) { emit(Level::info, m); }
inline void debug(const std::string& m) { emit(Level::debug, m); }

}  // namespace log
}  // namespace segkit
