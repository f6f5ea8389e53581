#include "simquery/log.hpp"

#include <iostream>
#include <mutex>

namespace simquery::log {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

Sink& current_sink() {
    static Sink sink = [](Level, const std::string& line) { std::cerr << line << '\n'; };
    return sink;
}

Level& min_level() {
    static Level level = Level::info;
    return level;
}

const char* level_name(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "info";
}

void append_value(std::string& out, const std::string& value) {
    const bool quote = value.empty() || value.find_first_of(" \t\"=") != std::string::npos;
    if (!quote) {
        out += value;
        return;
    }
    out += '"';
    for (char c : value) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
}

}  // namespace

void emit(Level level, std::string_view event, std::initializer_list<Field> fields) {
    std::lock_guard lock(sink_mutex());
    if (level < min_level() || !current_sink()) return;
    std::string line = "level=";
    line += level_name(level);
    line += " event=";
    line += event;
    for (const auto& [key, value] : fields) {
        line += ' ';
        line += key;
        line += '=';
        append_value(line, value);
    }
    current_sink()(level, line);
}

Sink set_sink(Sink sink) {
    std::lock_guard lock(sink_mutex());
    Sink previous = std::move(current_sink());
    current_sink() = std::move(sink);
    return previous;
}

void set_min_level(Level level) {
    std::lock_guard lock(sink_mutex());
    min_level() = level;
}

}  // namespace simquery::log
