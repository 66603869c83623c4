#include "deepfuse/log.hpp"

#include <iostream>
#include <mutex>

namespace deepfuse {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

LogSink& current_sink() {
    static LogSink sink = [](LogLevel level, std::string_view msg) {
        std::cerr << (level == LogLevel::Warning ? "warning: " : "") << msg << '\n';
    };
    return sink;
}

void emit(LogLevel level, std::string_view message) {
    std::lock_guard lock(sink_mutex());
    if (current_sink()) current_sink()(level, message);
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
    std::lock_guard lock(sink_mutex());
    LogSink previous = std::move(current_sink());
    current_sink() = std::move(sink);
    return previous;
}

void log_info(std::string_view message) { emit(LogLevel::Info, message); }
void log_warning(std::string_view message) { emit(LogLevel::Warning, message); }

}  // namespace deepfuse
