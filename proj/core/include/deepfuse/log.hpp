#pragma once

#include <functional>
#include <string_view>

namespace deepfuse {

enum class LogLevel { Info, Warning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Process-wide sink; defaults to stderr. Returns the previous sink.
LogSink set_log_sink(LogSink sink);

void log_info(std::string_view message);
void log_warning(std::string_view message);

// RAII guard that swaps the sink for the lifetime of the object.
class ScopedLogSink {
public:
    explicit ScopedLogSink(LogSink sink) : previous_(set_log_sink(std::move(sink))) {}
    ~ScopedLogSink() { set_log_sink(std::move(previous_)); }
    ScopedLogSink(const ScopedLogSink&) = delete;
    ScopedLogSink& operator=(const ScopedLogSink&) = delete;

private:
    LogSink previous_;
};

}  // namespace deepfuse
