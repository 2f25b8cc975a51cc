#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relialloc/system_model.hpp"

namespace relialloc {

using Count = std::int64_t;

// Integer sample sizes per component slot, block-major like the topology.
class Allocation {
 public:
  Allocation(SystemTopology topology, std::vector<Count> counts);

  static Allocation from_blocks(const std::vector<std::vector<Count>>& blocks);

  const SystemTopology& topology() const { return topology_; }
  Count at(Slot slot) const { return counts_[topology_.flat_index(slot)]; }
  std::span<const Count> block(std::size_t j) const;
  std::span<const Count> counts() const { return counts_; }

  Count block_total(std::size_t j) const;
  Count total() const;
  std::vector<Count> block_totals() const;
  std::vector<std::vector<Count>> to_blocks() const;

  friend bool operator==(const Allocation&, const Allocation&) = default;

 private:
  SystemTopology topology_;
  std::vector<Count> counts_;
};

// Exact Var{R_j hat} = (1 - R_j)^2 [prod_i (1 + c_ij^-2 / M_ij) - 1].
// Throws InvalidArgument when any count in the block is zero.
double subsystem_variance(const ReliabilityAssignment& assignment,
                          std::size_t block, const Allocation& allocation);

// Exact Var{R hat} = prod_j (Var{R_j hat} + R_j^2) - prod_j R_j^2 under
// independence within and across components.
double system_variance(const ReliabilityAssignment& assignment,
                       const Allocation& allocation);

// Sum over all products of at least two arguments, computed as
// prod(1 + x_i) - 1 - sum(x_i).
double cross_term(std::span<const double> args);

struct LagrangeSplit {
  double leading = 0.0;    // N^-1 (sum sqrt(a_i))^2
  double remainder = 0.0;  // N^-1 sum_{i<j} (N_i sqrt(a_j) - N_j sqrt(a_i))^2 / (N_i N_j)

  double total() const { return leading + remainder; }
};

// Splits sum a_i / N_i into its allocation-independent leading term and a
// nonnegative remainder that vanishes iff N_i is proportional to sqrt(a_i).
LagrangeSplit lagrange_split(std::span<const double> weights,
                             std::span<const double> sizes);

// Q_j = (1 - R_j)^2 (sum_i c_ij^-1)^2 / T_j. Real-valued budgets are allowed.
double subsystem_lower_bound(const ReliabilityAssignment& assignment,
                             std::size_t block, double block_budget);

// Q = R^2 [sum_j (1 - R_j)/R_j * sum_i c_ij^-1]^2 / T.
double system_lower_bound(const ReliabilityAssignment& assignment,
                          double budget);

// T (Var - Q). The variance may be exact or Monte Carlo, so the result may
// be slightly negative in the latter case.
double excess_variance(double variance, double lower_bound, double budget);
double excess_variance(const ReliabilityAssignment& assignment,
                       double variance, double budget);
double excess_variance(const ReliabilityAssignment& assignment,
                       const Allocation& allocation);

}  // namespace relialloc
