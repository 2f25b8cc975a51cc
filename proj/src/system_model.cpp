#include "relialloc/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "relialloc/errors.hpp"

namespace relialloc {

SystemTopology::SystemTopology(std::vector<std::size_t> block_sizes)
    : sizes_(std::move(block_sizes)) {
  if (sizes_.empty()) {
    throw InvalidArgument("topology needs at least one subsystem");
  }
  offsets_.reserve(sizes_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t n : sizes_) {
    if (n == 0) throw InvalidArgument("subsystem with no components");
    offsets_.push_back(offsets_.back() + n);
  }
}

std::size_t SystemTopology::block_size(std::size_t block) const {
  if (block >= sizes_.size()) {
    throw InvalidArgument("subsystem index " + std::to_string(block) +
                          " out of range");
  }
  return sizes_[block];
}

std::size_t SystemTopology::max_block_size() const {
  return *std::max_element(sizes_.begin(), sizes_.end());
}

std::size_t SystemTopology::offset(std::size_t block) const {
  if (block > sizes_.size()) {
    throw InvalidArgument("subsystem index " + std::to_string(block) +
                          " out of range");
  }
  return offsets_[block];
}

std::size_t SystemTopology::flat_index(Slot slot) const {
  if (slot.component >= block_size(slot.block)) {
    throw InvalidArgument("component index " + std::to_string(slot.component) +
                          " out of range in subsystem " +
                          std::to_string(slot.block));
  }
  return offsets_[slot.block] + slot.component;
}

Slot SystemTopology::slot_at(std::size_t flat) const {
  if (flat >= slot_count()) throw InvalidArgument("flat slot index out of range");
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  const auto block = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return Slot{block, flat - offsets_[block]};
}

ReliabilityAssignment::ReliabilityAssignment(SystemTopology topology,
                                             std::vector<double> values)
    : topology_(std::move(topology)), values_(std::move(values)) {
  if (values_.size() != topology_.slot_count()) {
    throw InvalidArgument("reliability count does not match topology");
  }
  for (double p : values_) {
    if (!(p > 0.0 && p < 1.0)) {
      throw InvalidArgument("component reliability must lie strictly in (0, 1), got " +
                            std::to_string(p));
    }
  }
}

ReliabilityAssignment ReliabilityAssignment::from_blocks(
    const std::vector<std::vector<double>>& blocks) {
  std::vector<std::size_t> sizes;
  std::vector<double> flat;
  for (const auto& b : blocks) {
    sizes.push_back(b.size());
    flat.insert(flat.end(), b.begin(), b.end());
  }
  return ReliabilityAssignment(SystemTopology(std::move(sizes)), std::move(flat));
}

std::span<const double> ReliabilityAssignment::block(std::size_t j) const {
  const std::size_t n = topology_.block_size(j);
  return std::span<const double>(values_).subspan(topology_.offset(j), n);
}

std::vector<std::vector<double>> ReliabilityAssignment::to_blocks() const {
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < topology_.block_count(); ++j) {
    auto b = block(j);
    out.emplace_back(b.begin(), b.end());
  }
  return out;
}

double subsystem_reliability(const ReliabilityAssignment& assignment,
                             std::size_t block) {
  double all_fail = 1.0;
  for (double p : assignment.block(block)) all_fail *= 1.0 - p;
  return 1.0 - all_fail;
}

double system_reliability(const ReliabilityAssignment& assignment) {
  double r = 1.0;
  for (std::size_t j = 0; j < assignment.topology().block_count(); ++j) {
    r *= subsystem_reliability(assignment, j);
  }
  return r;
}

CoefficientOfVariation coeff_variation(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("coefficient of variation needs p in (0, 1)");
  }
  return {std::sqrt((1.0 - p) / p), std::sqrt(p / (1.0 - p))};
}

DualSystem dual_transform(const DualSystem& system) {
  std::vector<double> complement;
  complement.reserve(system.values.values().size());
  for (double p : system.values.values()) complement.push_back(1.0 - p);
  return DualSystem{
      ReliabilityAssignment(system.topology(), std::move(complement)),
      system.kind == SystemKind::parallel_series ? SystemKind::series_parallel
                                                 : SystemKind::parallel_series};
}

double reliability(const DualSystem& system) {
  if (system.kind == SystemKind::parallel_series) {
    return system_reliability(system.values);
  }
  return 1.0 - system_reliability(dual_transform(system).values);
}

}  // namespace relialloc
