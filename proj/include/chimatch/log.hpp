#ifndef CHIMATCH_LOG_HPP
#define CHIMATCH_LOG_HPP

#include <string_view>

// Minimal stderr logger. Level is process-wide.
namespace chimatch::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
Level level();

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

} // namespace chimatch::log

#endif // CHIMATCH_LOG_HPP
