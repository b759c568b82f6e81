#pragma once

#include <string_view>

namespace rffpsr {

enum class LogLevel { quiet, warning, info };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_warning(std::string_view msg);
void log_info(std::string_view msg);

}  // namespace rffpsr
