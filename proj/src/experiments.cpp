#include "relialloc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "relialloc/allocation.hpp"
#include "relialloc/csv.hpp"
#include "relialloc/errors.hpp"
#include "relialloc/sampling.hpp"

namespace relialloc {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::hybrid: return "hybrid";
    case Scheme::fixed_split: return "fixed-split";
    case Scheme::balanced: return "balanced";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "hybrid") return Scheme::hybrid;
  if (name == "fixed-split") return Scheme::fixed_split;
  if (name == "balanced") return Scheme::balanced;
  throw InvalidArgument("unknown scheme '" + name + "'");
}

std::vector<Count> Sweep::points() const {
  std::vector<Count> out;
  for (Count t = start; t <= stop; t += step) out.push_back(t);
  return out;
}

Sweep parse_sweep(const std::string& text) {
  Sweep s;
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw InvalidArgument("sweep must be START:STOP:STEP");
  try {
    std::size_t used = 0;
    const std::string p0 = text.substr(0, a);
    const std::string p1 = text.substr(a + 1, b - a - 1);
    const std::string p2 = text.substr(b + 1);
    s.start = std::stoll(p0, &used);
    if (used != p0.size()) throw InvalidArgument(p0);
    s.stop = std::stoll(p1, &used);
    if (used != p1.size()) throw InvalidArgument(p1);
    s.step = std::stoll(p2, &used);
    if (used != p2.size()) throw InvalidArgument(p2);
  } catch (const std::exception&) {
    throw InvalidArgument("sweep must be START:STOP:STEP with integers");
  }
  if (s.start < 1 || s.stop < s.start || s.step < 1) {
    throw InvalidArgument("sweep bounds must be positive and ordered");
  }
  return s;
}

void ExperimentConfig::validate() const {
  if (replications < 2) throw InvalidArgument("need at least 2 replications");
  if (!sweep && budget < 1) throw InvalidArgument("budget must be positive");
  if (scheme == Scheme::fixed_split || first_block_budget) {
    if (system.topology().block_count() != 2) {
      throw InvalidArgument("fixed split needs exactly two subsystems");
    }
  }
}

VarianceEstimate empirical_variance(std::span<const double> samples) {
  const std::size_t k = samples.size();
  if (k < 2) throw InvalidArgument("empirical variance needs at least 2 samples");
  const auto kd = static_cast<double>(k);
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= kd;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : samples) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  const double s2 = m2 / (kd - 1.0);
  m4 /= kd;
  // Var(s^2) ~ (mu4 - (K - 3)/(K - 1) sigma^4) / K
  const double var_s2 = (m4 - (kd - 3.0) / (kd - 1.0) * s2 * s2) / kd;
  return {mean, s2, std::sqrt(std::max(0.0, var_s2))};
}

namespace {

ReplicationRecord run_one(const ReliabilityAssignment& system, Scheme scheme,
                          Count budget, std::optional<Count> first_block_budget,
                          const std::optional<Allocation>& fixed,
                          RandomStream stream) {
  SimulatedSource source(system, stream);
  const SystemTopology& topology = system.topology();
  SampleLedger ledger(topology);
  switch (scheme) {
    case Scheme::hybrid:
      ledger = hybrid_two_stage(source, topology, budget).ledger;
      break;
    case Scheme::fixed_split:
      two_stage_subsystem(source, 0, *first_block_budget, ledger);
      two_stage_subsystem(source, 1, budget - *first_block_budget, ledger);
      break;
    case Scheme::balanced:
      ledger = sample_fixed(source, *fixed);
      break;
  }
  const Allocation realized = ledger.allocation();
  return ReplicationRecord{estimate_reliability(ledger),
                           std::vector<Count>(realized.counts().begin(),
                                              realized.counts().end())};
}

}  // namespace

std::vector<ReplicationRecord> run_replications(
    const ReliabilityAssignment& system, Scheme scheme, Count budget,
    std::optional<Count> first_block_budget, std::size_t replications,
    std::uint64_t seed, std::uint64_t point_index, unsigned threads) {
  const SystemTopology& topology = system.topology();
  std::optional<Allocation> fixed;
  switch (scheme) {
    case Scheme::hybrid:
      check_hybrid_feasible(topology, budget);
      break;
    case Scheme::fixed_split: {
      if (topology.block_count() != 2) {
        throw InvalidArgument("fixed split needs exactly two subsystems");
      }
      if (!first_block_budget) throw InvalidArgument("fixed split needs T1");
      const Count t1 = *first_block_budget;
      if (t1 < static_cast<Count>(topology.block_size(0)) ||
          budget - t1 < static_cast<Count>(topology.block_size(1))) {
        throw Infeasible("split {" + std::to_string(t1) + ", " +
                         std::to_string(budget - t1) + "} leaves a component unsampled");
      }
      break;
    }
    case Scheme::balanced:
      fixed = balanced_allocation(topology, budget);
      break;
  }

  std::vector<ReplicationRecord> records(replications);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, std::max<std::size_t>(1, replications)));

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      records[r] = run_one(system, scheme, budget, first_block_budget, fixed,
                           RandomStream(seed, point_index, r));
    }
  };
  if (threads == 1) {
    work(0, replications);
    return records;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (replications + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(replications, t * chunk);
    const std::size_t end = std::min(replications, begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

SummaryPoint summarize(const ReliabilityAssignment& system, Count budget,
                       std::optional<Count> first_block_budget,
                       std::span<const ReplicationRecord> records) {
  const SystemTopology& topology = system.topology();
  SummaryPoint point;
  point.budget = budget;
  point.first_block_budget = first_block_budget;
  point.replications = records.size();

  std::vector<double> estimates;
  estimates.reserve(records.size());
  point.mean_counts.assign(topology.slot_count(), 0.0);
  point.mean_block_totals.assign(topology.block_count(), 0.0);
  double conditional = 0.0;
  for (const auto& rec : records) {
    estimates.push_back(rec.estimate);
    for (std::size_t s = 0; s < rec.counts.size(); ++s) {
      point.mean_counts[s] += static_cast<double>(rec.counts[s]);
    }
    conditional += system_variance(system, Allocation(topology, rec.counts));
  }
  const auto k = static_cast<double>(records.size());
  for (std::size_t j = 0; j < topology.block_count(); ++j) {
    for (std::size_t s = topology.offset(j); s < topology.offset(j + 1); ++s) {
      point.mean_counts[s] /= k;
      point.mean_block_totals[j] += point.mean_counts[s];
    }
  }
  point.mean_conditional_variance = conditional / k;
  point.estimate = empirical_variance(estimates);
  point.lower_bound = system_lower_bound(system, static_cast<double>(budget));
  point.excess = excess_variance(point.estimate.variance, point.lower_bound,
                                 static_cast<double>(budget));
  return point;
}

std::vector<SummaryPoint> run_fixed_split_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.system.topology().block_count() != 2) {
    throw InvalidArgument("fixed split needs exactly two subsystems");
  }
  const Count t = config.budget;
  const Count edge = pilot_size(t);
  std::vector<SummaryPoint> points;
  std::uint64_t index = 0;
  for (Count t1 = edge; t1 <= t - edge; ++t1, ++index) {
    const auto records =
        run_replications(config.system, Scheme::fixed_split, t, t1,
                         config.replications, config.seed, index, config.threads);
    points.push_back(summarize(config.system, t, t1, records));
  }
  return points;
}

SummaryPoint run_hybrid_expectation(const ExperimentConfig& config,
                                    std::uint64_t point_index) {
  config.validate();
  const auto records =
      run_replications(config.system, Scheme::hybrid, config.budget, std::nullopt,
                       config.replications, config.seed, point_index, config.threads);
  return summarize(config.system, config.budget, std::nullopt, records);
}

std::vector<SummaryPoint> run_convergence_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::vector<Count> budgets =
      config.sweep ? config.sweep->points() : std::vector<Count>{config.budget};
  for (Count t : budgets) check_hybrid_feasible(config.system.topology(), t);
  std::vector<SummaryPoint> points;
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    const auto records =
        run_replications(config.system, Scheme::hybrid, budgets[i], std::nullopt,
                         config.replications, config.seed, i, config.threads);
    points.push_back(summarize(config.system, budgets[i], std::nullopt, records));
  }
  return points;
}

std::vector<NamedSystem> table1_cases() {
  return {
      {"A", ReliabilityAssignment::from_blocks({{0.1, 0.11}, {0.9, 0.99}})},
      {"B", ReliabilityAssignment::from_blocks({{0.5, 0.55}, {0.51, 0.6}})},
      {"C", ReliabilityAssignment::from_blocks({{0.9, 0.99}, {0.1, 0.11}})},
      {"D", ReliabilityAssignment::from_blocks({{0.2, 0.4}, {0.6, 0.3}})},
  };
}

ReliabilityAssignment convergence_default_system() {
  return ReliabilityAssignment::from_blocks({
      {0.5, 0.6},
      {0.4, 0.5, 0.3},
      {0.3, 0.2, 0.4, 0.25},
      {0.2, 0.15, 0.3, 0.1, 0.25},
  });
}

void write_fixed_split_csv(std::ostream& out, std::span<const SummaryPoint> points) {
  out << "T1,var_hat,se,mean_R_hat\n";
  for (const auto& p : points) {
    out << p.first_block_budget.value_or(0) << ',' << format_double(p.estimate.variance)
        << ',' << format_double(p.estimate.standard_error) << ','
        << format_double(p.estimate.mean) << '\n';
  }
}

void write_convergence_csv(std::ostream& out, std::span<const SummaryPoint> points) {
  out << "T,var_hat,se,Q,excess\n";
  for (const auto& p : points) {
    out << p.budget << ',' << format_double(p.estimate.variance) << ','
        << format_double(p.estimate.standard_error) << ','
        << format_double(p.lower_bound) << ',' << format_double(p.excess) << '\n';
  }
}

void write_table1_csv(std::ostream& out, std::span<const std::string> names,
                      std::span<const SummaryPoint> points) {
  out << "case,mean_T1,rounded_T1\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double t1 = points[i].mean_block_totals.at(0);
    out << names[i] << ',' << format_double(t1) << ','
        << static_cast<Count>(std::llround(t1)) << '\n';
  }
}

namespace {

void slot_columns(std::ostream& out, const SystemTopology& topology,
                  const char* block_prefix, const char* slot_prefix) {
  for (std::size_t j = 0; j < topology.block_count(); ++j) {
    out << ',' << block_prefix << j + 1;
  }
  for (std::size_t j = 0; j < topology.block_count(); ++j) {
    for (std::size_t i = 0; i < topology.block_size(j); ++i) {
      out << ',' << slot_prefix << i + 1 << '_' << j + 1;
    }
  }
}

}  // namespace

void write_replications_csv(std::ostream& out, const SystemTopology& topology,
                            std::span<const ReplicationRecord> records) {
  out << "rep,R_hat";
  slot_columns(out, topology, "T_", "M_");
  out << '\n';
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Allocation a(topology, records[r].counts);
    out << r << ',' << format_double(records[r].estimate);
    for (Count t : a.block_totals()) out << ',' << t;
    for (Count m : a.counts()) out << ',' << m;
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const SystemTopology& topology,
                       const SummaryPoint& point) {
  out << "T,reps,mean_R_hat,var_hat,se,Q,excess,mean_conditional_var";
  slot_columns(out, topology, "mean_T_", "mean_M_");
  out << '\n';
  out << point.budget << ',' << point.replications << ','
      << format_double(point.estimate.mean) << ','
      << format_double(point.estimate.variance) << ','
      << format_double(point.estimate.standard_error) << ','
      << format_double(point.lower_bound) << ',' << format_double(point.excess) << ','
      << format_double(point.mean_conditional_variance);
  for (double t : point.mean_block_totals) out << ',' << format_double(t);
  for (double m : point.mean_counts) out << ',' << format_double(m);
  out << '\n';
}

}  // namespace relialloc
