#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relialloc {

// Component i of subsystem (block) j. Both indices are zero-based.
struct Slot {
  std::size_t block = 0;
  std::size_t component = 0;

  friend bool operator==(const Slot&, const Slot&) = default;
};

// Shape of a series arrangement of parallel blocks. Slots are stored
// block-major: every component of block 0, then block 1, and so on.
class SystemTopology {
 public:
  explicit SystemTopology(std::vector<std::size_t> block_sizes);

  std::size_t block_count() const { return sizes_.size(); }
  std::size_t block_size(std::size_t block) const;
  std::size_t slot_count() const { return offsets_.back(); }
  std::size_t max_block_size() const;

  // First flat index of `block`; offset(block_count()) == slot_count().
  std::size_t offset(std::size_t block) const;
  std::size_t flat_index(Slot slot) const;
  Slot slot_at(std::size_t flat) const;

  std::span<const std::size_t> block_sizes() const { return sizes_; }

  friend bool operator==(const SystemTopology& a, const SystemTopology& b) {
    return a.sizes_ == b.sizes_;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

// Component reliabilities, strictly inside (0, 1), aligned with a topology.
class ReliabilityAssignment {
 public:
  ReliabilityAssignment(SystemTopology topology, std::vector<double> values);

  static ReliabilityAssignment from_blocks(
      const std::vector<std::vector<double>>& blocks);

  const SystemTopology& topology() const { return topology_; }
  double at(Slot slot) const { return values_[topology_.flat_index(slot)]; }
  std::span<const double> block(std::size_t j) const;
  std::span<const double> values() const { return values_; }
  std::vector<std::vector<double>> to_blocks() const;

  friend bool operator==(const ReliabilityAssignment&,
                         const ReliabilityAssignment&) = default;

 private:
  SystemTopology topology_;
  std::vector<double> values_;
};

enum class SystemKind { parallel_series, series_parallel };

// A system tagged with how its blocks are wired. For parallel-series the
// values are component reliabilities of a series of parallel blocks. For
// series-parallel they are component reliabilities of a parallel
// arrangement of series blocks.
struct DualSystem {
  ReliabilityAssignment values;
  SystemKind kind = SystemKind::parallel_series;

  const SystemTopology& topology() const { return values.topology(); }

  friend bool operator==(const DualSystem&, const DualSystem&) = default;
};

double subsystem_reliability(const ReliabilityAssignment& assignment,
                             std::size_t block);

double system_reliability(const ReliabilityAssignment& assignment);

struct CoefficientOfVariation {
  double cv = 0.0;       // sqrt(1/p - 1)
  double inverse = 0.0;  // sqrt(p / (1 - p))
};

CoefficientOfVariation coeff_variation(double p);

// Swaps the kind tag and complements every value. Involution.
DualSystem dual_transform(const DualSystem& system);

// Reliability of a tagged system. Series-parallel systems are evaluated by
// mapping to the parallel-series dual: R_sp(r) = 1 - R_ps(1 - r).
double reliability(const DualSystem& system);

}  // namespace relialloc
