#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

#include "relialloc/system_model.hpp"
#include "relialloc/variance.hpp"

namespace relialloc {

// Source of Bernoulli observations X_ij^(l), one unit at a time.
class BernoulliSource {
 public:
  virtual ~BernoulliSource() = default;
  virtual bool draw(Slot slot) = 0;
};

// Deterministic per-replication stream: mt19937_64 seeded with a SplitMix64
// hash of (master seed, point index, replication index). Both are fully
// specified, so outcomes are identical across platforms.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t point_index,
               std::uint64_t replication_index);

  // Uniform on [0, 1) from the top 53 bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

class SimulatedSource final : public BernoulliSource {
 public:
  SimulatedSource(ReliabilityAssignment truth, RandomStream stream);
  bool draw(Slot slot) override;

 private:
  ReliabilityAssignment truth_;
  RandomStream stream_;
};

// Replays recorded outcomes. Input is CSV with header
// `subsystem,component,outcome`; indices are one-based, outcome is 0 or 1.
// Records are consumed in file order per slot.
class ReplaySource final : public BernoulliSource {
 public:
  ReplaySource(const SystemTopology& topology, std::istream& csv);
  static ReplaySource from_file(const SystemTopology& topology,
                                const std::filesystem::path& path);

  bool draw(Slot slot) override;
  std::size_t remaining(Slot slot) const;

 private:
  SystemTopology topology_;
  std::vector<std::deque<bool>> queues_;
};

// Realized draws and successes per slot.
class SampleLedger {
 public:
  explicit SampleLedger(SystemTopology topology);

  const SystemTopology& topology() const { return topology_; }
  Count draws(Slot slot) const { return draws_[topology_.flat_index(slot)]; }
  Count successes(Slot slot) const {
    return successes_[topology_.flat_index(slot)];
  }
  Count block_draws(std::size_t block) const;
  Count total_draws() const;

  void record(Slot slot, bool outcome);
  // Draws from `source` until `slot` has at least `target` draws.
  void draw_up_to(BernoulliSource& source, Slot slot, Count target);

  Allocation allocation() const { return Allocation(topology_, draws_); }

  friend bool operator==(const SampleLedger&, const SampleLedger&) = default;

 private:
  SystemTopology topology_;
  std::vector<Count> draws_;
  std::vector<Count> successes_;
};

// max(1, floor(sqrt(T))).
Count pilot_size(Count budget);

// Pilot size inside a block of `block_size` components: pilot_size(T_j),
// capped at floor(T_j / n_j) so that n_j pilots fit in the budget.
Count block_pilot_size(Count block_budget, std::size_t block_size);

struct PilotEstimate {
  double reliability = 0.0;
  double cv = 0.0;
  double cv_inverse = 0.0;
};

// MLE of R and c from `successes` out of `draws`, with successes clamped to
// [0.5, draws - 0.5] so both c and 1/c stay finite.
PilotEstimate mle_cv(Count draws, Count successes);

// Clamped MLE reliabilities for every slot. Requires at least one draw per slot.
ReliabilityAssignment estimated_assignment(const SampleLedger& ledger);

struct StagePlan {
  Count pilot = 0;
  Count budget = 0;
  std::vector<Count> targets;
};

// Two-stage design for one parallel block with budget T_j. Draws already in
// the ledger count toward both the pilot and the final targets. On return
// the block holds exactly T_j draws. The returned pilot is
// block_pilot_size(T_j), lowered only when earlier draws leave no room.
StagePlan two_stage_subsystem(BernoulliSource& source, std::size_t block,
                              Count block_budget, SampleLedger& ledger);

struct HybridResult {
  SampleLedger ledger;
  Allocation allocation;
  StagePlan subsystem_plan;  // pilot L, budget T, per-block totals T_j
  double estimate = 0.0;
};

// Throws Infeasible unless T >= n * L and L >= n_j for every block, where
// L = pilot_size(T).
void check_hybrid_feasible(const SystemTopology& topology, Count budget);

HybridResult hybrid_two_stage(BernoulliSource& source,
                              const SystemTopology& topology, Count budget);

// Draws exactly `allocation` from `source` into a fresh ledger.
SampleLedger sample_fixed(BernoulliSource& source, const Allocation& allocation);

// Product of parallel-block estimates built from raw sample means.
double estimate_reliability(const SampleLedger& ledger);

}  // namespace relialloc
