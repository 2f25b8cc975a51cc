#include "relialloc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "relialloc/allocation.hpp"
#include "relialloc/errors.hpp"

namespace relialloc {

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t point_index,
                           std::uint64_t replication_index) {
  // SplitMix64 finalizer chained over the three indices.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  const std::uint64_t key = mix(mix(mix(master_seed) ^ point_index) ^ replication_index);
  engine_.seed(key);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

SimulatedSource::SimulatedSource(ReliabilityAssignment truth, RandomStream stream)
    : truth_(std::move(truth)), stream_(stream) {}

bool SimulatedSource::draw(Slot slot) {
  return stream_.bernoulli(truth_.at(slot));
}

ReplaySource::ReplaySource(const SystemTopology& topology, std::istream& csv)
    : topology_(topology), queues_(topology.slot_count()) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(csv, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "subsystem,component,outcome") {
        throw ParseError("replay file must start with header subsystem,component,outcome");
      }
      header_seen = true;
      continue;
    }
    std::istringstream fields(line);
    std::string a, b, c, extra;
    if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') ||
        !std::getline(fields, c, ',') || std::getline(fields, extra, ',')) {
      throw ParseError("replay line " + std::to_string(line_no) + ": expected 3 fields");
    }
    std::size_t j = 0, i = 0;
    int outcome = -1;
    try {
      std::size_t used = 0;
      j = std::stoul(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      i = std::stoul(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
      outcome = std::stoi(c, &used);
      if (used != c.size()) throw std::invalid_argument(c);
    } catch (const std::exception&) {
      throw ParseError("replay line " + std::to_string(line_no) + ": bad number");
    }
    if (j < 1 || j > topology_.block_count() || i < 1 ||
        i > topology_.block_size(j - 1) || (outcome != 0 && outcome != 1)) {
      throw ParseError("replay line " + std::to_string(line_no) +
                       ": slot or outcome out of range");
    }
    queues_[topology_.flat_index(Slot{j - 1, i - 1})].push_back(outcome == 1);
  }
  if (!header_seen) throw ParseError("replay file is empty");
}

ReplaySource ReplaySource::from_file(const SystemTopology& topology,
                                     const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return ReplaySource(topology, in);
}

bool ReplaySource::draw(Slot slot) {
  auto& q = queues_[topology_.flat_index(slot)];
  if (q.empty()) {
    throw SourceExhausted("replay source exhausted for subsystem " +
                          std::to_string(slot.block + 1) + ", component " +
                          std::to_string(slot.component + 1));
  }
  const bool outcome = q.front();
  q.pop_front();
  return outcome;
}

std::size_t ReplaySource::remaining(Slot slot) const {
  return queues_[topology_.flat_index(slot)].size();
}

SampleLedger::SampleLedger(SystemTopology topology)
    : topology_(std::move(topology)),
      draws_(topology_.slot_count(), 0),
      successes_(topology_.slot_count(), 0) {}

Count SampleLedger::block_draws(std::size_t block) const {
  Count total = 0;
  for (std::size_t s = topology_.offset(block); s < topology_.offset(block + 1); ++s) {
    total += draws_[s];
  }
  return total;
}

Count SampleLedger::total_draws() const {
  Count total = 0;
  for (Count d : draws_) total += d;
  return total;
}

void SampleLedger::record(Slot slot, bool outcome) {
  const std::size_t s = topology_.flat_index(slot);
  ++draws_[s];
  if (outcome) ++successes_[s];
}

void SampleLedger::draw_up_to(BernoulliSource& source, Slot slot, Count target) {
  const std::size_t s = topology_.flat_index(slot);
  while (draws_[s] < target) {
    const bool outcome = source.draw(slot);
    ++draws_[s];
    if (outcome) ++successes_[s];
  }
}

Count pilot_size(Count budget) {
  if (budget < 1) return 1;
  auto root = static_cast<Count>(std::sqrt(static_cast<double>(budget)));
  while (root * root > budget) --root;
  while ((root + 1) * (root + 1) <= budget) ++root;
  return std::max<Count>(1, root);
}

Count block_pilot_size(Count block_budget, std::size_t block_size) {
  const Count share = block_budget / static_cast<Count>(block_size);
  return std::max<Count>(1, std::min(pilot_size(block_budget), share));
}

PilotEstimate mle_cv(Count draws, Count successes) {
  if (draws < 1 || successes < 0 || successes > draws) {
    throw InvalidArgument("mle_cv needs 0 <= successes <= draws and draws >= 1");
  }
  const auto l = static_cast<double>(draws);
  const double s = std::clamp(static_cast<double>(successes), 0.5, l - 0.5);
  // With one draw the clamp collapses to S' = 0.5 and R = 0.5.
  const double r = s / l;
  return {r, std::sqrt(l / s - 1.0), std::sqrt(s / (l - s))};
}

ReliabilityAssignment estimated_assignment(const SampleLedger& ledger) {
  const SystemTopology& topology = ledger.topology();
  std::vector<double> values;
  values.reserve(topology.slot_count());
  for (std::size_t s = 0; s < topology.slot_count(); ++s) {
    const Slot slot = topology.slot_at(s);
    values.push_back(mle_cv(ledger.draws(slot), ledger.successes(slot)).reliability);
  }
  return ReliabilityAssignment(topology, std::move(values));
}

StagePlan two_stage_subsystem(BernoulliSource& source, std::size_t block,
                              Count block_budget, SampleLedger& ledger) {
  const SystemTopology& topology = ledger.topology();
  const std::size_t n = topology.block_size(block);
  if (block_budget < static_cast<Count>(n)) {
    throw Infeasible("subsystem budget " + std::to_string(block_budget) +
                     " is smaller than its component count");
  }
  StagePlan plan;
  plan.budget = block_budget;
  plan.pilot = block_pilot_size(block_budget, n);

  // Stage 1: every component reaches the pilot size. Draws already in the
  // ledger can leave less room than n_j fresh pilots need; the pilot then
  // shrinks until the top-ups fit in the budget.
  std::vector<Count> floors(n);
  auto commit = [&](Count pilot) {
    Count committed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      floors[i] = std::max(pilot, ledger.draws(Slot{block, i}));
      committed += floors[i];
    }
    return committed;
  };
  while (commit(plan.pilot) > block_budget && plan.pilot > 1) --plan.pilot;
  if (commit(plan.pilot) > block_budget) {
    throw Infeasible("draws already made in subsystem " + std::to_string(block + 1) +
                     " exceed its budget of " + std::to_string(block_budget));
  }
  for (std::size_t i = 0; i < n; ++i) {
    ledger.draw_up_to(source, Slot{block, i}, plan.pilot);
  }

  // Stage 2: allocate the rest in proportion to the estimated 1/c.
  std::vector<double> cv_inverses(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Slot slot{block, i};
    cv_inverses[i] = mle_cv(ledger.draws(slot), ledger.successes(slot)).cv_inverse;
  }
  plan.targets = integerize(component_fractions(cv_inverses), block_budget, floors);
  for (std::size_t i = 0; i < n; ++i) {
    ledger.draw_up_to(source, Slot{block, i}, plan.targets[i]);
  }
  return plan;
}

void check_hybrid_feasible(const SystemTopology& topology, Count budget) {
  const Count pilot = pilot_size(budget);
  const auto n = static_cast<Count>(topology.block_count());
  if (budget < n * pilot) {
    throw Infeasible("budget " + std::to_string(budget) + " cannot cover a pilot of " +
                     std::to_string(pilot) + " in each of " + std::to_string(n) +
                     " subsystems");
  }
  if (pilot < static_cast<Count>(topology.max_block_size())) {
    throw Infeasible("pilot budget " + std::to_string(pilot) +
                     " is smaller than the largest subsystem");
  }
}

HybridResult hybrid_two_stage(BernoulliSource& source, const SystemTopology& topology,
                              Count budget) {
  check_hybrid_feasible(topology, budget);
  const std::size_t n = topology.block_count();
  SampleLedger ledger(topology);

  StagePlan plan;
  plan.budget = budget;
  plan.pilot = pilot_size(budget);

  // Stage 1: the two-stage component design in each block with budget L.
  for (std::size_t j = 0; j < n; ++j) {
    two_stage_subsystem(source, j, plan.pilot, ledger);
  }

  // Predict T_j from the pooled Stage-1 estimates, floored at L.
  const auto estimates = estimated_assignment(ledger);
  plan.targets = integerize(subsystem_fractions(estimates), budget, plan.pilot);

  // Stage 2: rerun the component design with the corrected budgets; units
  // drawn in Stage 1 count toward them.
  for (std::size_t j = 0; j < n; ++j) {
    two_stage_subsystem(source, j, plan.targets[j], ledger);
  }

  const double estimate = estimate_reliability(ledger);
  Allocation allocation = ledger.allocation();
  return HybridResult{std::move(ledger), std::move(allocation), std::move(plan), estimate};
}

SampleLedger sample_fixed(BernoulliSource& source, const Allocation& allocation) {
  SampleLedger ledger(allocation.topology());
  const SystemTopology& topology = allocation.topology();
  for (std::size_t s = 0; s < topology.slot_count(); ++s) {
    const Slot slot = topology.slot_at(s);
    ledger.draw_up_to(source, slot, allocation.counts()[s]);
  }
  return ledger;
}

double estimate_reliability(const SampleLedger& ledger) {
  const SystemTopology& topology = ledger.topology();
  double r = 1.0;
  for (std::size_t j = 0; j < topology.block_count(); ++j) {
    double all_fail = 1.0;
    for (std::size_t i = 0; i < topology.block_size(j); ++i) {
      const Slot slot{j, i};
      const Count m = ledger.draws(slot);
      if (m < 1) throw InvalidArgument("estimate needs at least one draw per component");
      all_fail *= 1.0 - static_cast<double>(ledger.successes(slot)) / static_cast<double>(m);
    }
    r *= 1.0 - all_fail;
  }
  return r;
}

}  // namespace relialloc
