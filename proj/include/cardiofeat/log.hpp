#pragma once

#include <string_view>

namespace cardiofeat {

/// "[stage] message" on stderr, one line, serialized across threads.
void log_stage(std::string_view stage, std::string_view message);
void set_log_enabled(bool enabled);

}  // namespace cardiofeat
