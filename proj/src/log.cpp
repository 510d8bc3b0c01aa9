#include "chimatch/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace chimatch::log {

namespace {

std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;

void write(Level lvl, std::string_view tag, std::string_view msg)
{
    if (lvl < g_level.load()) {
        return;
    }
    std::lock_guard lock(g_mutex);
    std::cerr << "[" << tag << "] " << msg << '\n';
}

} // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void debug(std::string_view msg) { write(Level::debug, "debug", msg); }
void info(std::string_view msg) { write(Level::info, "info", msg); }
void warn(std::string_view msg) { write(Level::warn, "warn", msg); }
void error(std::string_view msg) { write(Level::error, "error", msg); }

} // namespace chimatch::log
