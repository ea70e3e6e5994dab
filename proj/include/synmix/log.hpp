#pragma once

#include <string>
#include <vector>

namespace synmix {

/// Warnings go to stderr and are also kept so callers can count them.
void warn(const std::string& message);
std::vector<std::string> take_warnings();
void set_quiet(bool quiet);

}  // namespace synmix
