#include "relialloc/variance.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "relialloc/errors.hpp"

namespace relialloc {

Allocation::Allocation(SystemTopology topology, std::vector<Count> counts)
    : topology_(std::move(topology)), counts_(std::move(counts)) {
  if (counts_.size() != topology_.slot_count()) {
    throw InvalidArgument("allocation size does not match topology");
  }
  for (Count m : counts_) {
    if (m < 0) throw InvalidArgument("allocation counts must be nonnegative");
  }
}

Allocation Allocation::from_blocks(const std::vector<std::vector<Count>>& blocks) {
  std::vector<std::size_t> sizes;
  std::vector<Count> flat;
  for (const auto& b : blocks) {
    sizes.push_back(b.size());
    flat.insert(flat.end(), b.begin(), b.end());
  }
  return Allocation(SystemTopology(std::move(sizes)), std::move(flat));
}

std::span<const Count> Allocation::block(std::size_t j) const {
  const std::size_t n = topology_.block_size(j);
  return std::span<const Count>(counts_).subspan(topology_.offset(j), n);
}

Count Allocation::block_total(std::size_t j) const {
  auto b = block(j);
  return std::accumulate(b.begin(), b.end(), Count{0});
}

Count Allocation::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), Count{0});
}

std::vector<Count> Allocation::block_totals() const {
  std::vector<Count> out;
  for (std::size_t j = 0; j < topology_.block_count(); ++j) {
    out.push_back(block_total(j));
  }
  return out;
}

std::vector<std::vector<Count>> Allocation::to_blocks() const {
  std::vector<std::vector<Count>> out;
  for (std::size_t j = 0; j < topology_.block_count(); ++j) {
    auto b = block(j);
    out.emplace_back(b.begin(), b.end());
  }
  return out;
}

namespace {

void require_same_shape(const ReliabilityAssignment& assignment,
                        const Allocation& allocation) {
  if (!(assignment.topology() == allocation.topology())) {
    throw InvalidArgument("allocation shape does not match the system");
  }
}

}  // namespace

double subsystem_variance(const ReliabilityAssignment& assignment,
                          std::size_t block, const Allocation& allocation) {
  require_same_shape(assignment, allocation);
  auto p = assignment.block(block);
  auto m = allocation.block(block);
  double product = 1.0;
  double all_fail = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (m[i] < 1) {
      throw InvalidArgument("every component needs at least one unit");
    }
    // c^-2 = p / (1 - p)
    product *= 1.0 + p[i] / (1.0 - p[i]) / static_cast<double>(m[i]);
    all_fail *= 1.0 - p[i];
  }
  return all_fail * all_fail * (product - 1.0);
}

double system_variance(const ReliabilityAssignment& assignment,
                       const Allocation& allocation) {
  double second_moment = 1.0;
  double squared_mean = 1.0;
  for (std::size_t j = 0; j < assignment.topology().block_count(); ++j) {
    const double rj = subsystem_reliability(assignment, j);
    second_moment *= subsystem_variance(assignment, j, allocation) + rj * rj;
    squared_mean *= rj * rj;
  }
  return second_moment - squared_mean;
}

double cross_term(std::span<const double> args) {
  double product = 1.0;
  double sum = 0.0;
  for (double x : args) {
    product *= 1.0 + x;
    sum += x;
  }
  return product - 1.0 - sum;
}

LagrangeSplit lagrange_split(std::span<const double> weights,
                             std::span<const double> sizes) {
  if (weights.size() != sizes.size() || weights.empty()) {
    throw InvalidArgument("lagrange_split needs equal, non-empty inputs");
  }
  double root_sum = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !(sizes[i] > 0.0)) {
      throw InvalidArgument("lagrange_split needs positive entries");
    }
    root_sum += std::sqrt(weights[i]);
    total += sizes[i];
  }
  double cross = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    for (std::size_t j = i + 1; j < weights.size(); ++j) {
      const double d = sizes[i] * std::sqrt(weights[j]) - sizes[j] * std::sqrt(weights[i]);
      cross += d * d / (sizes[i] * sizes[j]);
    }
  }
  return {root_sum * root_sum / total, cross / total};
}

namespace {

double cv_inverse_sum(std::span<const double> block) {
  double s = 0.0;
  for (double p : block) s += std::sqrt(p / (1.0 - p));
  return s;
}

}  // namespace

double subsystem_lower_bound(const ReliabilityAssignment& assignment,
                             std::size_t block, double block_budget) {
  if (!(block_budget >= 1.0)) {
    throw InvalidArgument("subsystem budget must be at least 1");
  }
  const double fail = 1.0 - subsystem_reliability(assignment, block);
  const double s = cv_inverse_sum(assignment.block(block));
  return fail * fail * s * s / block_budget;
}

double system_lower_bound(const ReliabilityAssignment& assignment, double budget) {
  if (!(budget >= 1.0)) throw InvalidArgument("budget must be at least 1");
  double r = 1.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < assignment.topology().block_count(); ++j) {
    const double rj = subsystem_reliability(assignment, j);
    r *= rj;
    weighted += (1.0 - rj) / rj * cv_inverse_sum(assignment.block(j));
  }
  return r * r * weighted * weighted / budget;
}

double excess_variance(double variance, double lower_bound, double budget) {
  if (variance < 0.0 || lower_bound < 0.0 || budget < 0.0) {
    throw InvalidArgument("excess_variance needs nonnegative inputs");
  }
  return budget * (variance - lower_bound);
}

double excess_variance(const ReliabilityAssignment& assignment, double variance,
                       double budget) {
  return excess_variance(variance, system_lower_bound(assignment, budget), budget);
}

double excess_variance(const ReliabilityAssignment& assignment,
                       const Allocation& allocation) {
  const auto budget = static_cast<double>(allocation.total());
  return excess_variance(system_variance(assignment, allocation),
                         system_lower_bound(assignment, budget), budget);
}

}  // namespace relialloc
