#pragma once

#include <string_view>

namespace distinct {

/// Warnings go to stderr unless DISTINCT_QUIET is set.
void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace distinct
