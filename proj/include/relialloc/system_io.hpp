#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "relialloc/system_model.hpp"
#include "relialloc/variance.hpp"

namespace relialloc {

// {"blocks": [[0.1, 0.11], [0.9, 0.99]]}
// Outer array lists subsystems in series; inner arrays list the parallel
// component reliabilities. Throws ParseError / InvalidArgument.
ReliabilityAssignment parse_system_json(std::string_view text);
ReliabilityAssignment load_system_file(const std::filesystem::path& path);
std::string to_system_json(const ReliabilityAssignment& assignment);

// {"counts": [[10, 10], [10, 10]]}, shape must match `topology`.
Allocation parse_allocation_json(std::string_view text,
                                 const SystemTopology& topology);
Allocation load_allocation_file(const std::filesystem::path& path,
                                const SystemTopology& topology);

}  // namespace relialloc
