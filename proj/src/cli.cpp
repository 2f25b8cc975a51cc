#include "relialloc/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "relialloc/allocation.hpp"
#include "relialloc/errors.hpp"
#include "relialloc/experiments.hpp"
#include "relialloc/system_io.hpp"
#include "relialloc/system_model.hpp"
#include "relialloc/variance.hpp"

namespace relialloc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 1;

// Error raised with an explicit exit code.
struct Failure {
  ExitCode code;
  std::string message;
};

struct Options {
  std::vector<std::string> systems;
  std::string allocation_path;
  std::string config_path;
  std::string out;
  std::string scheme = "hybrid";
  std::string sweep;
  Count budget = 0;
  Count first_block = 0;
  Count min_per_slot = 1;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool rule = false;
  bool oracle = false;
  bool balanced = false;
  bool fixed_split = false;
  bool table1 = false;
  bool convergence = false;
};

std::string g6(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

ReliabilityAssignment load_system(const std::string& path) {
  try {
    return load_system_file(path);
  } catch (const ParseError& e) {
    throw Failure{kBadInput, e.what()};
  } catch (const InvalidArgument& e) {
    throw Failure{kBadInput, path + ": " + e.what()};
  }
}

ordered_json system_json(const std::string& path, const ReliabilityAssignment& a) {
  return ordered_json{{"path", path}, {"blocks", a.to_blocks()}};
}

ReliabilityAssignment system_from_json(const ordered_json& j) {
  try {
    return ReliabilityAssignment::from_blocks(
        j.at("blocks").get<std::vector<std::vector<double>>>());
  } catch (const std::exception& e) {
    throw Failure{kBadInput, std::string("sidecar system: ") + e.what()};
  }
}

// All files make it to disk or none do.
class AtomicOutputs {
 public:
  std::ostream& open(const fs::path& path) {
    auto& entry = entries_.emplace_back();
    entry.target = path;
    entry.temp = path;
    entry.temp += ".tmp";
    entry.stream = std::make_unique<std::ofstream>(entry.temp, std::ios::binary);
    if (!*entry.stream) {
      discard();
      throw Failure{kOutputError, "cannot write " + path.string()};
    }
    return *entry.stream;
  }

  void commit() {
    for (auto& e : entries_) {
      e.stream->flush();
      if (!*e.stream) {
        discard();
        throw Failure{kOutputError, "failed writing " + e.target.string()};
      }
      e.stream->close();
    }
    for (auto& e : entries_) {
      std::error_code ec;
      fs::rename(e.temp, e.target, ec);
      if (ec) {
        discard();
        throw Failure{kOutputError, "cannot rename into " + e.target.string()};
      }
    }
    entries_.clear();
  }

  void discard() {
    for (auto& e : entries_) {
      if (e.stream) e.stream->close();
      std::error_code ec;
      fs::remove(e.temp, ec);
    }
    entries_.clear();
  }

  ~AtomicOutputs() { discard(); }

 private:
  struct Entry {
    fs::path target;
    fs::path temp;
    std::unique_ptr<std::ofstream> stream;
  };
  std::vector<Entry> entries_;
};

fs::path sidecar_path(const fs::path& out) {
  fs::path p = out;
  return p.replace_extension(".json");
}

fs::path summary_path(const fs::path& out) {
  fs::path p = out;
  p.replace_extension();
  p += ".summary.csv";
  return p;
}

std::uint64_t resolve_seed(const CLI::App& app, const Options& o,
                           const ordered_json* config) {
  if (app.count("--seed")) return o.seed;
  if (config && config->contains("seed")) return config->at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("RELIALLOC_SEED")) {
    try {
      std::size_t used = 0;
      const std::string s(env);
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw Failure{kUsage, "RELIALLOC_SEED must be an unsigned integer"};
  }
  return kDefaultSeed;
}

ordered_json read_sidecar(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw Failure{kBadInput, "cannot open " + path};
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw Failure{kBadInput, path + ": " + e.what()};
  }
  if (!doc.contains("command") || doc.at("command") != command ||
      !doc.contains("config")) {
    throw Failure{kBadInput, path + " is not a " + command + " sidecar"};
  }
  return doc.at("config");
}

ordered_json sidecar(const std::string& command, ordered_json config) {
  return ordered_json{{"tool", "relialloc"},
                      {"version", RELIALLOC_VERSION},
                      {"command", command},
                      {"config", std::move(config)}};
}

void print_system(std::ostream& out, const ReliabilityAssignment& a) {
  out << "R: " << g6(system_reliability(a)) << '\n';
  for (std::size_t j = 0; j < a.topology().block_count(); ++j) {
    out << "R_" << j + 1 << ": " << g6(subsystem_reliability(a, j)) << '\n';
  }
  for (std::size_t j = 0; j < a.topology().block_count(); ++j) {
    for (std::size_t i = 0; i < a.topology().block_size(j); ++i) {
      const auto c = coeff_variation(a.at(Slot{j, i}));
      out << "c_" << i + 1 << '_' << j + 1 << ": " << g6(c.cv)
          << " (inverse " << g6(c.inverse) << ")\n";
    }
  }
}

void print_allocation(std::ostream& out, const Allocation& a) {
  out << "allocation:";
  for (const auto& block : a.to_blocks()) {
    out << " [";
    for (std::size_t i = 0; i < block.size(); ++i) out << (i ? " " : "") << block[i];
    out << ']';
  }
  out << '\n';
  out << "T_j:";
  for (Count t : a.block_totals()) out << ' ' << t;
  out << '\n';
}

int cmd_evaluate(const CLI::App& app, const Options& o, std::ostream& out) {
  if (o.systems.size() != 1) throw Failure{kUsage, "evaluate needs one --system"};
  const auto system = load_system(o.systems[0]);
  std::optional<Allocation> allocation;
  if (!o.allocation_path.empty()) {
    try {
      allocation = load_allocation_file(o.allocation_path, system.topology());
    } catch (const ParseError& e) {
      throw Failure{kBadInput, e.what()};
    } catch (const InvalidArgument& e) {
      throw Failure{kBadInput, e.what()};
    }
    for (Count m : allocation->counts()) {
      if (m < 1) throw Failure{kInfeasible, "every component needs at least one unit"};
    }
    if (app.count("--T") && o.budget != allocation->total()) {
      throw Failure{kInfeasible, "--T does not match the allocation total"};
    }
  }
  std::ostringstream report;
  print_system(report, system);
  if (allocation) {
    const auto t = static_cast<double>(allocation->total());
    const double var = system_variance(system, *allocation);
    const double q = system_lower_bound(system, t);
    print_allocation(report, *allocation);
    report << "T: " << allocation->total() << '\n';
    report << "Var: " << g6(var) << '\n';
    report << "Q: " << g6(q) << '\n';
    report << "excess: " << g6(excess_variance(var, q, t)) << '\n';
  } else if (app.count("--T")) {
    if (o.budget < 1) throw Failure{kInfeasible, "--T must be positive"};
    report << "T: " << o.budget << '\n';
    report << "Q: " << g6(system_lower_bound(system, static_cast<double>(o.budget))) << '\n';
  }
  out << report.str();
  return kOk;
}

int cmd_allocate(const Options& o, std::ostream& out) {
  if (o.systems.size() != 1) throw Failure{kUsage, "allocate needs one --system"};
  if (int(o.rule) + int(o.oracle) + int(o.balanced) != 1) {
    throw Failure{kUsage, "choose exactly one of --rule, --oracle, --balanced"};
  }
  if (o.budget < 1) throw Failure{kUsage, "--T must be positive"};
  const auto system = load_system(o.systems[0]);
  std::ostringstream report;
  std::optional<Allocation> allocation;
  if (o.rule) {
    allocation = rule_allocation(system, o.budget);
    report << "mode: rule\n";
  } else if (o.balanced) {
    allocation = balanced_allocation(system.topology(), o.budget);
    report << "mode: balanced\n";
  } else {
    const auto best = brute_force_optimal(system, o.budget, o.min_per_slot);
    allocation = best.allocation;
    report << "mode: oracle\n";
    report << "candidates: " << best.candidates << '\n';
    report << "certified optimal Var: " << g6(best.variance) << '\n';
  }
  const auto t = static_cast<double>(o.budget);
  print_allocation(report, *allocation);
  report << "Var: " << g6(system_variance(system, *allocation)) << '\n';
  report << "Q: " << g6(system_lower_bound(system, t)) << '\n';
  out << report.str();
  return kOk;
}

struct RunSettings {
  std::string system_path;
  ReliabilityAssignment system;
  Count budget = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::hybrid;
  std::optional<Count> first_block;
};

int cmd_simulate(const CLI::App& app, const Options& o, std::ostream& out) {
  std::optional<ordered_json> config;
  if (!o.config_path.empty()) config = read_sidecar(o.config_path, "simulate");
  auto pick = [&](const char* flag, const char* key, auto value) {
    using T = decltype(value);
    if (app.count(flag) || !config || !config->contains(key) || config->at(key).is_null()) {
      return value;
    }
    return config->at(key).get<T>();
  };

  std::string system_path;
  std::optional<ReliabilityAssignment> system;
  if (!o.systems.empty()) {
    if (o.systems.size() != 1) throw Failure{kUsage, "simulate needs one --system"};
    system_path = o.systems[0];
    system = load_system(system_path);
  } else if (config) {
    system_path = config->at("system").at("path").get<std::string>();
    system = system_from_json(config->at("system"));
  } else {
    throw Failure{kUsage, "simulate needs --system"};
  }
  const Count budget = pick("--T", "T", o.budget);
  const std::size_t reps = pick("--reps", "reps", o.reps);
  const std::string scheme_name = pick("--scheme", "scheme", o.scheme);
  std::optional<Count> first_block;
  if (app.count("--T1")) {
    first_block = o.first_block;
  } else if (config && config->contains("T1") && !config->at("T1").is_null()) {
    first_block = config->at("T1").get<Count>();
  }
  const std::uint64_t seed = resolve_seed(app, o, config ? &*config : nullptr);
  if (o.out.empty()) throw Failure{kUsage, "simulate needs --out"};
  if (reps < 2) throw Failure{kUsage, "--reps must be at least 2"};
  if (budget < 1) throw Failure{kUsage, "--T must be positive"};
  Scheme scheme;
  try {
    scheme = parse_scheme(scheme_name);
  } catch (const InvalidArgument& e) {
    throw Failure{kUsage, e.what()};
  }
  if (scheme == Scheme::fixed_split && !first_block) {
    throw Failure{kUsage, "--scheme fixed-split needs --T1"};
  }
  if (scheme != Scheme::fixed_split) first_block.reset();

  const auto records = run_replications(*system, scheme, budget, first_block, reps,
                                        seed, 0, o.threads);
  const auto summary = summarize(*system, budget, first_block, records);

  ordered_json cfg{{"system", system_json(system_path, *system)},
                   {"T", budget},
                   {"reps", reps},
                   {"seed", seed},
                   {"scheme", to_string(scheme)},
                   {"T1", first_block ? ordered_json(*first_block) : ordered_json(nullptr)}};

  AtomicOutputs files;
  write_replications_csv(files.open(o.out), system->topology(), records);
  write_summary_csv(files.open(summary_path(o.out)), system->topology(), summary);
  files.open(sidecar_path(o.out)) << sidecar("simulate", cfg).dump(2) << '\n';
  files.commit();

  out << "scheme: " << to_string(scheme) << '\n';
  out << "T: " << budget << "  reps: " << reps << "  seed: " << seed << '\n';
  out << "mean R_hat: " << g6(summary.estimate.mean) << '\n';
  out << "var_hat: " << g6(summary.estimate.variance) << " (se "
      << g6(summary.estimate.standard_error) << ")\n";
  out << "Q: " << g6(summary.lower_bound) << '\n';
  out << "excess: " << g6(summary.excess) << '\n';
  out << "mean T_j:";
  for (double t : summary.mean_block_totals) out << ' ' << g6(t);
  out << '\n';
  return kOk;
}

ordered_json point_diagnostics(const SummaryPoint& p) {
  ordered_json j{{"T", p.budget},
                 {"mean_R_hat", p.estimate.mean},
                 {"var_hat", p.estimate.variance},
                 {"se", p.estimate.standard_error},
                 {"mean_conditional_var", p.mean_conditional_variance},
                 {"Q", p.lower_bound},
                 {"mean_T_j", p.mean_block_totals},
                 {"mean_M_ij", p.mean_counts}};
  if (p.first_block_budget) j["T1"] = *p.first_block_budget;
  return j;
}

int cmd_experiment(const CLI::App& app, const Options& o, std::ostream& out) {
  const int modes = int(o.fixed_split) + int(o.table1) + int(o.convergence);
  if (modes != 1) {
    throw Failure{kUsage, "choose exactly one of --fixed-split, --table1, --convergence"};
  }
  std::optional<ordered_json> config;
  if (!o.config_path.empty()) config = read_sidecar(o.config_path, "experiment");
  if (config && config->value("mode", "") !=
                    (o.fixed_split ? "fixed-split" : o.table1 ? "table1" : "convergence")) {
    throw Failure{kUsage, "sidecar was written by a different experiment mode"};
  }
  auto pick = [&](const char* flag, const char* key, auto value) {
    using T = decltype(value);
    if (app.count(flag) || !config || !config->contains(key) || config->at(key).is_null()) {
      return value;
    }
    return config->at(key).get<T>();
  };
  if (o.out.empty()) throw Failure{kUsage, "experiment needs --out"};

  // Systems: explicit files, else the sidecar copy, else built-in defaults.
  std::vector<std::string> names;
  std::vector<std::string> paths;
  std::vector<ReliabilityAssignment> systems;
  if (!o.systems.empty()) {
    for (const auto& p : o.systems) {
      paths.push_back(p);
      names.push_back(fs::path(p).stem().string());
      systems.push_back(load_system(p));
    }
  } else if (config) {
    for (const auto& s : config->at("systems")) {
      paths.push_back(s.at("path").get<std::string>());
      names.push_back(s.at("name").get<std::string>());
      systems.push_back(system_from_json(s));
    }
  } else if (o.table1) {
    for (const auto& c : table1_cases()) {
      paths.push_back("");
      names.push_back(c.name);
      systems.push_back(c.system);
    }
  } else if (o.convergence) {
    paths.push_back("");
    names.push_back("default");
    systems.push_back(convergence_default_system());
  } else {
    throw Failure{kUsage, "--fixed-split needs --system"};
  }
  if (!o.table1 && systems.size() != 1) {
    throw Failure{kUsage, "this experiment takes exactly one --system"};
  }

  const std::size_t default_reps = o.table1 ? 20000 : o.convergence ? 5000 : 20000;
  ExperimentConfig ec{.system = systems[0],
                      .budget = 0,
                      .sweep = std::nullopt,
                      .replications = 2,
                      .seed = kDefaultSeed,
                      .scheme = Scheme::hybrid,
                      .first_block_budget = std::nullopt,
                      .threads = 0};
  ec.replications = app.count("--reps") ? o.reps : pick("--reps", "reps", default_reps);
  ec.seed = resolve_seed(app, o, config ? &*config : nullptr);
  ec.threads = o.threads;
  ec.budget = pick("--T", "T", o.budget == 0 && !o.convergence ? Count{20} : o.budget);
  std::string sweep_text = pick("--sweep", "sweep", o.sweep);
  if (o.convergence) {
    if (sweep_text.empty()) {
      if (ec.budget < 1) sweep_text = "100:10000:100";
      else sweep_text = std::to_string(ec.budget) + ":" + std::to_string(ec.budget) + ":1";
    }
    try {
      ec.sweep = parse_sweep(sweep_text);
    } catch (const InvalidArgument& e) {
      throw Failure{kUsage, e.what()};
    }
    ec.budget = 0;
  }
  if (ec.replications < 2) throw Failure{kUsage, "--reps must be at least 2"};

  ordered_json sys = ordered_json::array();
  for (std::size_t i = 0; i < systems.size(); ++i) {
    auto s = system_json(paths[i], systems[i]);
    s["name"] = names[i];
    sys.push_back(std::move(s));
  }
  ordered_json cfg{{"mode", o.fixed_split ? "fixed-split" : o.table1 ? "table1" : "convergence"},
                   {"systems", sys},
                   {"reps", ec.replications},
                   {"seed", ec.seed}};
  if (o.convergence) {
    cfg["sweep"] = sweep_text;
  } else {
    cfg["T"] = ec.budget;
  }

  std::vector<SummaryPoint> points;
  AtomicOutputs files;
  if (o.fixed_split) {
    points = run_fixed_split_experiment(ec);
    write_fixed_split_csv(files.open(o.out), points);
  } else if (o.table1) {
    for (std::size_t i = 0; i < systems.size(); ++i) {
      ExperimentConfig c = ec;
      c.system = systems[i];
      points.push_back(run_hybrid_expectation(c, i));
    }
    write_table1_csv(files.open(o.out), names, points);
  } else {
    points = run_convergence_sweep(ec);
    write_convergence_csv(files.open(o.out), points);
  }
  ordered_json doc = sidecar("experiment", cfg);
  doc["diagnostics"] = ordered_json::array();
  for (const auto& p : points) doc["diagnostics"].push_back(point_diagnostics(p));
  files.open(sidecar_path(o.out)) << doc.dump(2) << '\n';
  files.commit();

  if (o.fixed_split) {
    const auto best = std::min_element(points.begin(), points.end(), [](auto& a, auto& b) {
      return a.estimate.variance < b.estimate.variance;
    });
    out << "points: " << points.size() << "  argmin T1: " << *best->first_block_budget
        << "  var_hat: " << g6(best->estimate.variance) << '\n';
  } else if (o.table1) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      out << names[i] << ": mean T1 " << g6(points[i].mean_block_totals[0]) << " -> "
          << std::llround(points[i].mean_block_totals[0]) << '\n';
    }
  } else {
    for (const auto& p : points) {
      out << "T " << p.budget << ": var_hat " << g6(p.estimate.variance) << "  Q "
          << g6(p.lower_bound) << "  excess " << g6(p.excess) << '\n';
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sample allocation for parallel-series reliability estimation", "relialloc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", RELIALLOC_VERSION);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--system", o.systems, "System JSON file")->check(CLI::ExistingFile);
    sub->add_option("--T", o.budget, "Total sample size");
    sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  };

  auto* evaluate = app.add_subcommand("evaluate", "Reliability, variance and bounds");
  add_common(evaluate);
  evaluate->add_option("--allocation", o.allocation_path, "Allocation JSON file");

  auto* allocate = app.add_subcommand("allocate", "Allocate a fixed budget");
  add_common(allocate);
  allocate->add_flag("--rule", o.rule, "Closed-form allocation rules");
  allocate->add_flag("--oracle", o.oracle, "Exhaustive integer optimum");
  allocate->add_flag("--balanced", o.balanced, "Equal counts per component");
  allocate->add_option("--min", o.min_per_slot, "Oracle minimum units per component");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo replications of a scheme");
  add_common(simulate);
  simulate->add_option("--reps", o.reps, "Replications");
  simulate->add_option("--seed", o.seed, "Master seed (else RELIALLOC_SEED)");
  simulate->add_option("--scheme", o.scheme, "hybrid, balanced or fixed-split");
  simulate->add_option("--T1", o.first_block, "Budget of subsystem 1 for fixed-split");
  simulate->add_option("--out", o.out, "Per-replication CSV path");
  simulate->add_option("--config", o.config_path, "Rerun from a JSON sidecar");

  auto* experiment = app.add_subcommand("experiment", "Reproduce the allocation experiments");
  add_common(experiment);
  experiment->add_flag("--fixed-split", o.fixed_split, "Variance over every split {T1, T - T1}");
  experiment->add_flag("--table1", o.table1, "Mean T1 of the hybrid design for cases A-D");
  experiment->add_flag("--convergence", o.convergence, "Excess of variance over a T sweep");
  experiment->add_option("--reps", o.reps, "Replications per point");
  experiment->add_option("--seed", o.seed, "Master seed (else RELIALLOC_SEED)");
  experiment->add_option("--sweep", o.sweep, "START:STOP:STEP");
  experiment->add_option("--out", o.out, "CSV path");
  experiment->add_option("--config", o.config_path, "Rerun from a JSON sidecar");

  std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << RELIALLOC_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    // Missing input files are malformed input, not a usage error.
    if (dynamic_cast<const CLI::ValidationError*>(&e) != nullptr) {
      err << "error: " << e.what() << '\n';
      return kBadInput;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*evaluate) return cmd_evaluate(*evaluate, o, out);
    if (*allocate) return cmd_allocate(o, out);
    if (*simulate) return cmd_simulate(*simulate, o, out);
    return cmd_experiment(*experiment, o, out);
  } catch (const Failure& f) {
    err << "error: " << f.message << '\n';
    return f.code;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const Infeasible& e) {
    err << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const SearchLimitExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kSearchLimit;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace relialloc::cli
