#include "rffpsr/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace rffpsr {
namespace {

std::atomic<LogLevel> g_level{LogLevel::warning};
std::mutex g_mutex;

}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

void log_warning(std::string_view msg) {
  if (g_level.load() == LogLevel::quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "warning: " << msg << '\n';
}

void log_info(std::string_view msg) {
  if (g_level.load() != LogLevel::info) return;
  std::lock_guard lock(g_mutex);
  std::cerr << msg << '\n';
}

}  // namespace rffpsr
