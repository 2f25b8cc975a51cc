#pragma once

#include <string>

namespace relialloc {

// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

}  // namespace relialloc
