#include "relialloc/allocation.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "relialloc/errors.hpp"

namespace relialloc {

std::vector<double> component_fractions(std::span<const double> cv_inverses) {
  if (cv_inverses.empty()) throw InvalidArgument("empty block");
  double total = 0.0;
  for (double c : cv_inverses) {
    if (!(c > 0.0)) throw InvalidArgument("cv inverses must be positive");
    total += c;
  }
  std::vector<double> out;
  out.reserve(cv_inverses.size());
  for (double c : cv_inverses) out.push_back(c / total);
  return out;
}

std::vector<double> subsystem_weights(const ReliabilityAssignment& assignment) {
  std::vector<double> w;
  for (std::size_t j = 0; j < assignment.topology().block_count(); ++j) {
    const double rj = subsystem_reliability(assignment, j);
    double s = 0.0;
    for (double p : assignment.block(j)) s += coeff_variation(p).inverse;
    w.push_back((1.0 - rj) / rj * s);
  }
  return w;
}

std::vector<double> subsystem_fractions(const ReliabilityAssignment& assignment) {
  auto w = subsystem_weights(assignment);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

AllocationRulePlan rule_plan(const ReliabilityAssignment& assignment) {
  AllocationRulePlan plan;
  for (std::size_t j = 0; j < assignment.topology().block_count(); ++j) {
    std::vector<double> inv;
    for (double p : assignment.block(j)) inv.push_back(coeff_variation(p).inverse);
    const auto f = component_fractions(inv);
    plan.component_fractions.insert(plan.component_fractions.end(), f.begin(), f.end());
  }
  plan.subsystem_fractions = subsystem_fractions(assignment);
  return plan;
}

std::vector<Count> integerize(std::span<const double> fractions, Count total,
                              std::span<const Count> floors) {
  const std::size_t k = fractions.size();
  if (k == 0 || floors.size() != k) {
    throw InvalidArgument("integerize needs one floor per fraction");
  }
  const Count floor_sum = std::accumulate(floors.begin(), floors.end(), Count{0});
  if (total < floor_sum) {
    throw Infeasible("cannot split " + std::to_string(total) +
                     " units under floors summing to " + std::to_string(floor_sum));
  }
  std::vector<Count> counts(k);
  Count assigned = 0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    // The small offset keeps exact products such as (1/3) * 30 from
    // flooring one unit low.
    const auto share = static_cast<Count>(
        std::floor(fractions[i] * static_cast<double>(total) + 1e-9));
    counts[i] = std::max(floors[i], share);
    assigned += counts[i];
  }
  counts[k - 1] = total - assigned;
  while (counts[k - 1] < floors[k - 1]) {
    std::size_t donor = k;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      if (counts[i] > floors[i] && (donor == k || counts[i] > counts[donor])) {
        donor = i;
      }
    }
    --counts[donor];
    ++counts[k - 1];
  }
  return counts;
}

std::vector<Count> integerize(std::span<const double> fractions, Count total,
                              Count floor_per_slot) {
  if (floor_per_slot < 0) throw InvalidArgument("negative floor");
  const std::vector<Count> floors(fractions.size(), floor_per_slot);
  return integerize(fractions, total, floors);
}

Allocation balanced_allocation(const SystemTopology& topology, Count total) {
  const std::size_t k = topology.slot_count();
  if (total < static_cast<Count>(k)) {
    throw Infeasible("balanced allocation needs at least one unit per component");
  }
  const std::vector<double> uniform(k, 1.0 / static_cast<double>(k));
  return Allocation(topology, integerize(uniform, total, 1));
}

Allocation rule_allocation(const ReliabilityAssignment& assignment, Count total) {
  const SystemTopology& topology = assignment.topology();
  const auto plan = rule_plan(assignment);
  const auto block_totals = integerize(
      plan.subsystem_fractions, total, static_cast<Count>(topology.max_block_size()));
  std::vector<Count> counts;
  counts.reserve(topology.slot_count());
  for (std::size_t j = 0; j < topology.block_count(); ++j) {
    const auto f = std::span<const double>(plan.component_fractions)
                       .subspan(topology.offset(j), topology.block_size(j));
    const auto m = integerize(f, block_totals[j], 1);
    counts.insert(counts.end(), m.begin(), m.end());
  }
  return Allocation(topology, std::move(counts));
}

std::uint64_t composition_count(std::size_t slots, Count total, Count min_per_slot) {
  if (slots == 0) return total == 0 ? 1 : 0;
  const Count spare = total - static_cast<Count>(slots) * min_per_slot;
  if (spare < 0) return 0;
  // C(spare + slots - 1, slots - 1), built incrementally so every partial
  // product is itself a binomial coefficient.
  const auto n = static_cast<std::uint64_t>(spare) + slots - 1;
  const std::uint64_t r = slots - 1;
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t c = 1;
  for (std::uint64_t i = 1; i <= r; ++i) {
    const std::uint64_t factor = n - r + i;
    if (c > kMax / factor) return kMax;
    c = c * factor / i;
  }
  return c;
}

namespace {

// Exact system variance for a flat count vector without building Allocation.
class VarianceKernel {
 public:
  explicit VarianceKernel(const ReliabilityAssignment& assignment)
      : topology_(assignment.topology()) {
    for (double p : assignment.values()) odds_.push_back(p / (1.0 - p));
    for (std::size_t j = 0; j < topology_.block_count(); ++j) {
      const double rj = subsystem_reliability(assignment, j);
      fail_sq_.push_back((1.0 - rj) * (1.0 - rj));
      rel_sq_.push_back(rj * rj);
    }
    squared_mean_ = 1.0;
    for (double r2 : rel_sq_) squared_mean_ *= r2;
  }

  double operator()(const std::vector<Count>& m) const {
    double second_moment = 1.0;
    for (std::size_t j = 0; j < topology_.block_count(); ++j) {
      double product = 1.0;
      const std::size_t end = topology_.offset(j + 1);
      for (std::size_t s = topology_.offset(j); s < end; ++s) {
        product *= 1.0 + odds_[s] / static_cast<double>(m[s]);
      }
      second_moment *= fail_sq_[j] * (product - 1.0) + rel_sq_[j];
    }
    return second_moment - squared_mean_;
  }

 private:
  const SystemTopology& topology_;
  std::vector<double> odds_;
  std::vector<double> fail_sq_;
  std::vector<double> rel_sq_;
  double squared_mean_ = 1.0;
};

}  // namespace

OptimalAllocation brute_force_optimal(const ReliabilityAssignment& assignment,
                                      Count total, Count min_per_slot,
                                      std::uint64_t search_limit) {
  const SystemTopology& topology = assignment.topology();
  const std::size_t k = topology.slot_count();
  if (min_per_slot < 1) {
    throw InvalidArgument("brute force needs at least one unit per slot");
  }
  const std::uint64_t space = composition_count(k, total, min_per_slot);
  if (space == 0) throw Infeasible("no allocation satisfies the per-slot minimum");
  if (space > search_limit) {
    throw SearchLimitExceeded("search space of " + std::to_string(space) +
                              " allocations exceeds limit " +
                              std::to_string(search_limit));
  }

  const VarianceKernel variance(assignment);
  std::vector<Count> m(k, min_per_slot);
  std::vector<Count> best;
  double best_var = std::numeric_limits<double>::infinity();
  std::uint64_t visited = 0;

  // Lexicographic walk over compositions: slots 0..k-2 take values in
  // increasing order, the last slot absorbs the rest.
  const Count spare = total - static_cast<Count>(k) * min_per_slot;
  m[k - 1] = min_per_slot + spare;
  while (true) {
    ++visited;
    const double v = variance(m);
    // Ties within rounding noise keep the earlier (smaller) allocation.
    if (v < best_var * (1.0 - 1e-13)) {
      best_var = v;
      best = m;
    }
    if (k == 1) break;
    // Successor: grow slot k-2 while the last slot has room; otherwise reset
    // the exhausted slot to the minimum and carry into the previous one.
    std::size_t pos = k - 2;
    while (true) {
      if (m[k - 1] > min_per_slot) {
        ++m[pos];
        --m[k - 1];
        break;
      }
      if (pos == 0) {
        pos = k;  // done
        break;
      }
      m[k - 1] += m[pos] - min_per_slot;
      m[pos] = min_per_slot;
      --pos;
    }
    if (pos == k) break;
  }

  return OptimalAllocation{Allocation(topology, std::move(best)), best_var, visited};
}

}  // namespace relialloc
