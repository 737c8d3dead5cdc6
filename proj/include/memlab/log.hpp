#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace memlab {

enum class LogLevel { Debug, Info, Warn, Error };

using LogSink = std::function<void(LogLevel, std::string_view)>;

namespace detail {

struct LogState {
    std::mutex mutex;
    LogLevel threshold = LogLevel::Warn;
    LogSink sink;
};

inline LogState& log_state() {
    static LogState state;
    return state;
}

inline std::string_view level_name(LogLevel level) {
    switch (level) {
        case LogLevel::Debug: return "debug";
        case LogLevel::Info: return "info";
        case LogLevel::Warn: return "warn";
        case LogLevel::Error: return "error";
    }
    return "?";
}

}  // namespace detail

// Replace the sink (tests capture warnings this way). An empty sink restores stderr.
inline void set_log_sink(LogSink sink) {
    auto& state = detail::log_state();
    std::lock_guard lock(state.mutex);
    state.sink = std::move(sink);
}

inline void set_log_level(LogLevel level) {
    auto& state = detail::log_state();
    std::lock_guard lock(state.mutex);
    state.threshold = level;
}

inline void log(LogLevel level, std::string_view message) {
    auto& state = detail::log_state();
    std::lock_guard lock(state.mutex);
    if (state.sink) {
        state.sink(level, message);
        return;
    }
    if (level < state.threshold) return;
    std::cerr << "[memlab " << detail::level_name(level) << "] " << message << '\n';
}

inline void log_info(std::string_view message) { log(LogLevel::Info, message); }
inline void log_warn(std::string_view message) { log(LogLevel::Warn, message); }

}  // namespace memlab
