#include <doctest.h>

#include <sstream>

#include "relialloc/allocation.hpp"
#include "relialloc/csv.hpp"
#include "relialloc/errors.hpp"
#include "relialloc/experiments.hpp"
#include "relialloc/sampling.hpp"
#include "relialloc/system_io.hpp"

using namespace relialloc;

namespace {

ExperimentConfig config_for(ReliabilityAssignment system, Count budget, std::size_t reps,
                            std::uint64_t seed = 1) {
  ExperimentConfig c{.system = std::move(system),
                     .budget = budget,
                     .sweep = std::nullopt,
                     .replications = reps,
                     .seed = seed,
                     .scheme = Scheme::hybrid,
                     .first_block_budget = std::nullopt,
                     .threads = 1};
  return c;
}

}  // namespace

TEST_CASE("empirical variance") {
  auto e = empirical_variance(std::vector<double>{0.0, 1.0});
  CHECK(e.variance == 0.5);
  CHECK(e.mean == 0.5);
  e = empirical_variance(std::vector<double>{0.3, 0.3, 0.3});
  CHECK(e.variance == 0.0);
  CHECK(e.standard_error == 0.0);
  CHECK_THROWS_AS(empirical_variance(std::vector<double>{1.0}), InvalidArgument);

  // 10^6 means of 10 fair coin flips: Var = 0.25 / 10.
  std::vector<double> means(1'000'000);
  for (std::size_t r = 0; r < means.size(); ++r) {
    RandomStream s(2, 0, r);
    int hits = 0;
    for (int k = 0; k < 10; ++k) hits += s.bernoulli(0.5);
    means[r] = hits / 10.0;
  }
  e = empirical_variance(means);
  CHECK(std::abs(e.variance - 0.025) < 3 * e.standard_error);
  CHECK(e.standard_error > 0.0);
}

TEST_CASE("sweep parsing") {
  const auto s = parse_sweep("100:400:100");
  CHECK(s.points() == std::vector<Count>{100, 200, 300, 400});
  CHECK(parse_sweep("5:5:1").points() == std::vector<Count>{5});
  for (const char* bad : {"", "1:2", "a:b:c", "10:5:1", "0:5:1", "1:5:0", "1:5:2x"}) {
    CHECK_THROWS_AS(parse_sweep(bad), InvalidArgument);
  }
}

TEST_CASE("scheme names") {
  for (Scheme s : {Scheme::hybrid, Scheme::fixed_split, Scheme::balanced}) {
    CHECK(parse_scheme(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_scheme("sequential"), InvalidArgument);
}

TEST_CASE("config validation") {
  auto c = config_for(table1_cases()[0].system, 20, 1);
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = config_for(convergence_default_system(), 100, 10);
  c.scheme = Scheme::fixed_split;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_THROWS_AS(run_fixed_split_experiment(config_for(convergence_default_system(), 100, 10)),
                  InvalidArgument);
}

TEST_CASE("replications do not depend on the thread count") {
  const auto sys = table1_cases()[3].system;
  const auto one = run_replications(sys, Scheme::hybrid, 20, std::nullopt, 1001, 5, 3, 1);
  const auto four = run_replications(sys, Scheme::hybrid, 20, std::nullopt, 1001, 5, 3, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t r = 0; r < one.size(); ++r) {
    CHECK(one[r].estimate == four[r].estimate);
    CHECK(one[r].counts == four[r].counts);
  }
}

TEST_CASE("replication errors") {
  const auto sys = table1_cases()[0].system;
  CHECK_THROWS_AS(run_replications(sys, Scheme::hybrid, 3, std::nullopt, 2, 1, 0, 1), Infeasible);
  CHECK_THROWS_AS(run_replications(sys, Scheme::fixed_split, 20, std::nullopt, 2, 1, 0, 1),
                  InvalidArgument);
  CHECK_THROWS_AS(run_replications(sys, Scheme::fixed_split, 20, 19, 2, 1, 0, 1), Infeasible);
  CHECK_THROWS_AS(run_replications(sys, Scheme::balanced, 3, std::nullopt, 2, 1, 0, 1), Infeasible);
}

TEST_CASE("fixed allocation: Monte Carlo variance matches the exact formula") {
  const auto sys = ReliabilityAssignment::from_blocks({{0.3, 0.6}, {0.7, 0.2, 0.4}});
  const auto records = run_replications(sys, Scheme::balanced, 25, std::nullopt, 100000, 4, 0, 0);
  const auto point = summarize(sys, 25, std::nullopt, records);
  const double exact = system_variance(sys, balanced_allocation(sys.topology(), 25));
  CHECK(std::abs(point.estimate.variance - exact) < 3 * point.estimate.standard_error);
  CHECK(point.mean_conditional_variance == doctest::Approx(exact).epsilon(1e-12));
  CHECK(point.estimate.variance >= point.lower_bound - 3 * point.estimate.standard_error);
}

TEST_CASE("fixed split experiment") {
  auto cfg = config_for(table1_cases()[2].system, 20, 4000, 11);
  const auto points = run_fixed_split_experiment(cfg);
  REQUIRE(points.size() == 13);
  CHECK(*points.front().first_block_budget == 4);
  CHECK(*points.back().first_block_budget == 16);
  std::size_t best = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].mean_block_totals[0] == doctest::Approx(4.0 + i));
    if (points[i].estimate.variance < points[best].estimate.variance) best = i;
  }
  CHECK(*points[best].first_block_budget <= 6);

  // Exchangeable blocks: mirror splits agree within noise.
  auto sym = config_for(ReliabilityAssignment::from_blocks({{0.4, 0.6}, {0.4, 0.6}}), 20, 20000, 3);
  const auto s = run_fixed_split_experiment(sym);
  for (std::size_t i = 0; i < s.size() / 2; ++i) {
    const auto& a = s[i].estimate;
    const auto& b = s[s.size() - 1 - i].estimate;
    const double se = std::hypot(a.standard_error, b.standard_error);
    CHECK(std::abs(a.variance - b.variance) < 4 * se);
  }

  auto tiny = config_for(table1_cases()[0].system, 20, 2, 9);
  std::ostringstream x, y;
  write_fixed_split_csv(x, run_fixed_split_experiment(tiny));
  write_fixed_split_csv(y, run_fixed_split_experiment(tiny));
  CHECK(x.str() == y.str());
}

TEST_CASE("hybrid expectation on case D") {
  const auto point = run_hybrid_expectation(config_for(table1_cases()[3].system, 20, 5000, 2));
  CHECK(point.mean_block_totals[0] + point.mean_block_totals[1] == doctest::Approx(20.0));
  CHECK(std::abs(point.mean_block_totals[0] - 12.0) <= 2.0);
}

TEST_CASE("convergence sweep") {
  const auto single = ReliabilityAssignment::from_blocks({{0.3}});
  auto cfg = config_for(single, 0, 4000, 21);
  cfg.sweep = parse_sweep("100:400:100");
  const auto points = run_convergence_sweep(cfg);
  REQUIRE(points.size() == 4);
  for (const auto& p : points) {
    CHECK(p.lower_bound == system_lower_bound(single, static_cast<double>(p.budget)));
    CHECK(std::abs(p.excess) < 3.0 * p.budget * p.estimate.standard_error);
    CHECK(p.mean_conditional_variance == doctest::Approx(p.lower_bound).epsilon(1e-12));
  }

  auto bad = config_for(convergence_default_system(), 0, 10);
  bad.sweep = parse_sweep("16:100:4");
  CHECK_THROWS_AS(run_convergence_sweep(bad), Infeasible);

  // Reruns give identical files.
  auto small = config_for(convergence_default_system(), 0, 20, 5);
  small.sweep = parse_sweep("100:300:100");
  std::ostringstream x, y;
  write_convergence_csv(x, run_convergence_sweep(small));
  write_convergence_csv(y, run_convergence_sweep(small));
  CHECK(x.str() == y.str());
  CHECK(x.str().rfind("T,var_hat,se,Q,excess\n100,", 0) == 0);
}

TEST_CASE("csv layouts") {
  const auto sys = table1_cases()[0].system;
  const auto records = run_replications(sys, Scheme::hybrid, 20, std::nullopt, 3, 1, 0, 1);
  std::ostringstream reps;
  write_replications_csv(reps, sys.topology(), records);
  CHECK(reps.str().rfind("rep,R_hat,T_1,T_2,M_1_1,M_2_1,M_1_2,M_2_2\n0,", 0) == 0);

  const auto point = summarize(sys, 20, std::nullopt, records);
  std::ostringstream sum;
  write_summary_csv(sum, sys.topology(), point);
  CHECK(sum.str().rfind("T,reps,mean_R_hat,var_hat,se,Q,excess,mean_conditional_var,"
                        "mean_T_1,mean_T_2,mean_M_1_1,mean_M_2_1,mean_M_1_2,mean_M_2_2\n20,3,",
                        0) == 0);

  std::ostringstream t1;
  const std::vector<std::string> names{"A"};
  write_table1_csv(t1, names, std::vector<SummaryPoint>{point});
  CHECK(t1.str().rfind("case,mean_T1,rounded_T1\nA,", 0) == 0);

  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(std::stod(format_double(0.014937890625)) == 0.014937890625);
}

TEST_CASE("shipped fixtures match the built-in systems") {
  const std::string dir = RELIALLOC_DATA_DIR;
  const char* files[] = {"case_a.json", "case_b.json", "case_c.json", "case_d.json"};
  const auto cases = table1_cases();
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(load_system_file(dir + "/" + files[i]) == cases[i].system);
  }
  const auto conv = load_system_file(dir + "/convergence_default.json");
  CHECK(conv == convergence_default_system());
  CHECK(conv.topology() == SystemTopology({2, 3, 4, 5}));
  for (double p : conv.values()) {
    CHECK(p >= 0.1);
    CHECK(p <= 0.95);
  }
}
