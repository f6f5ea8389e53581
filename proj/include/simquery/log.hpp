#pragma once

#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace simquery::log {

enum class Level { debug, info, warn, error };

using Field = std::pair<std::string_view, std::string>;
using Sink = std::function<void(Level, const std::string& line)>;

/// Emits `level=<l> event=<event> key=value ...` to the current sink.
/// Values containing spaces or quotes are double-quoted.
void emit(Level level, std::string_view event, std::initializer_list<Field> fields = {});

inline void info(std::string_view event, std::initializer_list<Field> fields = {}) {
    emit(Level::info, event, fields);
}
inline void warn(std::string_view event, std::initializer_list<Field> fields = {}) {
    emit(Level::warn, event, fields);
}

/// Replaces the sink (default: stderr). Returns the previous one.
Sink set_sink(Sink sink);
void set_min_level(Level level);

/// Swaps in a sink for the lifetime of the object; used by tests.
class ScopedSink {
public:
    explicit ScopedSink(Sink sink) : previous_(set_sink(std::move(sink))) {}
    ~ScopedSink() { set_sink(std::move(previous_)); }
    ScopedSink(const ScopedSink&) = delete;
    ScopedSink& operator=(const ScopedSink&) = delete;

private:
    Sink previous_;
};

}  // namespace simquery::log
