#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relialloc/system_model.hpp"
#include "relialloc/variance.hpp"

namespace relialloc {

enum class Scheme { hybrid, fixed_split, balanced };

const char* to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct Sweep {
  Count start = 0;
  Count stop = 0;
  Count step = 1;

  std::vector<Count> points() const;
};

Sweep parse_sweep(const std::string& text);  // "START:STOP:STEP"

struct ExperimentConfig {
  ReliabilityAssignment system;
  Count budget = 0;
  std::optional<Sweep> sweep;
  std::size_t replications = 2;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::hybrid;
  std::optional<Count> first_block_budget;  // for Scheme::fixed_split
  unsigned threads = 0;                     // 0 = hardware concurrency

  void validate() const;
};

struct VarianceEstimate {
  double mean = 0.0;
  double variance = 0.0;        // divisor K - 1
  double standard_error = 0.0;  // fourth-moment formula
};

VarianceEstimate empirical_variance(std::span<const double> samples);

struct ReplicationRecord {
  double estimate = 0.0;
  std::vector<Count> counts;  // realized M_ij, block-major
};

// Runs `replications` independent replications of `scheme` at budget T. The
// stream for replication r is RandomStream(seed, point_index, r). Results are
// ordered by replication index whatever the thread count.
std::vector<ReplicationRecord> run_replications(
    const ReliabilityAssignment& system, Scheme scheme, Count budget,
    std::optional<Count> first_block_budget, std::size_t replications,
    std::uint64_t seed, std::uint64_t point_index, unsigned threads);

struct SummaryPoint {
  Count budget = 0;
  std::optional<Count> first_block_budget;
  std::size_t replications = 0;
  VarianceEstimate estimate;
  std::vector<double> mean_block_totals;
  std::vector<double> mean_counts;
  double lower_bound = 0.0;
  double excess = 0.0;
  // Mean of the exact variance conditional on each realized allocation.
  double mean_conditional_variance = 0.0;
};

SummaryPoint summarize(const ReliabilityAssignment& system, Count budget,
                       std::optional<Count> first_block_budget,
                       std::span<const ReplicationRecord> records);

// Two-block systems only: fixed split {T1, T - T1} for
// T1 = floor(sqrt T) .. T - floor(sqrt T), two-stage design inside blocks.
std::vector<SummaryPoint> run_fixed_split_experiment(const ExperimentConfig& config);

// Monte Carlo summary of the hybrid design at config.budget.
SummaryPoint run_hybrid_expectation(const ExperimentConfig& config,
                                    std::uint64_t point_index = 0);

// Hybrid design over config.sweep (or the single config.budget).
std::vector<SummaryPoint> run_convergence_sweep(const ExperimentConfig& config);

struct NamedSystem {
  std::string name;
  ReliabilityAssignment system;
};

// Two-by-two systems A-D with their reliabilities.
std::vector<NamedSystem> table1_cases();

// Default reliabilities for the 2/3/4/5-component convergence system.
ReliabilityAssignment convergence_default_system();

// CSV writers. Doubles use shortest round-trip formatting.
void write_fixed_split_csv(std::ostream& out, std::span<const SummaryPoint> points);
void write_convergence_csv(std::ostream& out, std::span<const SummaryPoint> points);
void write_table1_csv(std::ostream& out, std::span<const std::string> names,
                      std::span<const SummaryPoint> points);
void write_replications_csv(std::ostream& out, const SystemTopology& topology,
                            std::span<const ReplicationRecord> records);
void write_summary_csv(std::ostream& out, const SystemTopology& topology,
                       const SummaryPoint& point);

}  // namespace relialloc
