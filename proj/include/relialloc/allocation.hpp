#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relialloc/system_model.hpp"
#include "relialloc/variance.hpp"

namespace relialloc {

// Component split inside each block and subsystem split across blocks.
struct AllocationRulePlan {
  std::vector<double> component_fractions;  // block-major, sums to 1 per block
  std::vector<double> subsystem_fractions;  // one per block, sums to 1
};

// fraction_i = c_i^-1 / sum_k c_k^-1.
std::vector<double> component_fractions(std::span<const double> cv_inverses);

// Unnormalized subsystem weights (1 - R_j)/R_j * sum_k c_kj^-1.
std::vector<double> subsystem_weights(const ReliabilityAssignment& assignment);

std::vector<double> subsystem_fractions(const ReliabilityAssignment& assignment);

AllocationRulePlan rule_plan(const ReliabilityAssignment& assignment);

// Floor-and-remainder rounding. Every slot but the last gets
// max(floor_i, floor(fraction_i * total)); the last takes what is left. If
// that leaves the last slot under its floor, the currently largest other
// slot still above its own floor gives up one unit (lowest index on ties)
// until the last slot reaches its floor. The result always sums to `total`.
std::vector<Count> integerize(std::span<const double> fractions, Count total,
                              std::span<const Count> floors);
std::vector<Count> integerize(std::span<const double> fractions, Count total,
                              Count floor_per_slot);

Allocation balanced_allocation(const SystemTopology& topology, Count total);

// Subsystem totals follow the subsystem rule (floored at the largest block
// size so every component can get a unit), then components follow the
// component rule inside each block with a floor of one unit.
Allocation rule_allocation(const ReliabilityAssignment& assignment,
                           Count total);

struct OptimalAllocation {
  Allocation allocation;
  double variance = 0.0;
  std::uint64_t candidates = 0;
};

inline constexpr std::uint64_t kDefaultSearchLimit = 10'000'000;

// Number of compositions of `total` into `slots` parts each >= min_per_slot,
// saturating at UINT64_MAX.
std::uint64_t composition_count(std::size_t slots, Count total,
                                Count min_per_slot);

// Exhaustive minimum of system_variance over all integer allocations of
// `total` with at least `min_per_slot` units per slot. Ties resolve to the
// lexicographically smallest allocation.
OptimalAllocation brute_force_optimal(
    const ReliabilityAssignment& assignment, Count total, Count min_per_slot,
    std::uint64_t search_limit = kDefaultSearchLimit);

}  // namespace relialloc
