#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relialloc/cli.hpp"

namespace fs = std::filesystem;
using relialloc::cli::run;

namespace {

const std::string kData = RELIALLOC_DATA_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "relialloc");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "relialloc_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("cli evaluate") {
  auto r = invoke({"evaluate", "--system", kData + "/symmetric_2x2.json", "--allocation",
                   kData + "/balanced_2x2_m10.json"});
  CHECK(r.code == 0);
  CHECK(r.out.find("R: 0.5625\n") != std::string::npos);
  CHECK(r.out.find("Var: 0.0149379\n") != std::string::npos);
  CHECK(r.out.find("Q: 0.0140625\n") != std::string::npos);
  CHECK(r.out.find("excess: 0.0350156\n") != std::string::npos);
  CHECK(r.out.find("c_2_1: 1 (inverse 1)") != std::string::npos);

  const auto dir = scratch("evaluate");
  write(dir / "m25.json", R"({"counts": [[25, 25, 25, 25]]})");
  r = invoke({"evaluate", "--system", kData + "/intro_parallel.json", "--allocation",
              (dir / "m25.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("Var: 1.4231e-06\n") != std::string::npos);

  r = invoke({"evaluate", "--system", kData + "/symmetric_2x2.json", "--T", "40"});
  CHECK(r.code == 0);
  CHECK(r.out.find("Q: 0.0140625\n") != std::string::npos);
}

TEST_CASE("cli evaluate errors") {
  auto r = invoke({"evaluate", "--system", "/nonexistent/system.json"});
  CHECK(r.code == relialloc::cli::kBadInput);
  CHECK(r.out.empty());

  const auto dir = scratch("evaluate_errors");
  write(dir / "bad.json", R"({"blocks": [[0.5, 1.5]]})");
  r = invoke({"evaluate", "--system", (dir / "bad.json").string()});
  CHECK(r.code == relialloc::cli::kBadInput);
  CHECK(r.out.empty());

  write(dir / "garbled.json", "{blocks");
  CHECK(invoke({"evaluate", "--system", (dir / "garbled.json").string()}).code ==
        relialloc::cli::kBadInput);

  write(dir / "zero.json", R"({"counts": [[10, 0], [10, 10]]})");
  r = invoke({"evaluate", "--system", kData + "/symmetric_2x2.json", "--allocation",
              (dir / "zero.json").string()});
  CHECK(r.code == relialloc::cli::kInfeasible);
  CHECK(r.out.empty());

  write(dir / "shape.json", R"({"counts": [[10, 10]]})");
  CHECK(invoke({"evaluate", "--system", kData + "/symmetric_2x2.json", "--allocation",
                (dir / "shape.json").string()})
            .code == relialloc::cli::kBadInput);

  CHECK(invoke({"evaluate"}).code == relialloc::cli::kUsage);
  CHECK(invoke({"frobnicate"}).code == relialloc::cli::kUsage);
  CHECK(invoke({}).code == relialloc::cli::kUsage);
}

TEST_CASE("cli allocate") {
  const auto dir = scratch("allocate");
  write(dir / "mixed.json", R"({"blocks": [[0.9, 0.5]]})");
  auto r = invoke({"allocate", "--system", (dir / "mixed.json").string(), "--T", "4", "--oracle"});
  CHECK(r.code == 0);
  CHECK(r.out.find("allocation: [3 1]\n") != std::string::npos);
  CHECK(r.out.find("certified optimal Var: 0.0175\n") != std::string::npos);

  r = invoke({"allocate", "--system", kData + "/case_d.json", "--T", "20", "--rule"});
  CHECK(r.code == 0);
  CHECK(r.out.find("T_j: 12 8\n") != std::string::npos);

  r = invoke({"allocate", "--system", kData + "/intro_parallel.json", "--T", "100", "--balanced"});
  CHECK(r.code == 0);
  CHECK(r.out.find("allocation: [25 25 25 25]\n") != std::string::npos);

  r = invoke({"allocate", "--system", kData + "/convergence_default.json", "--T", "1000",
              "--oracle"});
  CHECK(r.code == relialloc::cli::kSearchLimit);
  CHECK(r.out.empty());

  CHECK(invoke({"allocate", "--system", kData + "/case_d.json", "--T", "20"}).code ==
        relialloc::cli::kUsage);
  CHECK(invoke({"allocate", "--system", kData + "/case_d.json", "--T", "20", "--rule", "--oracle"})
            .code == relialloc::cli::kUsage);
  CHECK(invoke({"allocate", "--system", kData + "/case_d.json", "--T", "3", "--balanced"}).code ==
        relialloc::cli::kInfeasible);
}

TEST_CASE("cli simulate writes reproducible files") {
  const auto dir = scratch("simulate");
  const auto out1 = dir / "a.csv";
  const auto out2 = dir / "b.csv";
  const std::vector<std::string> base{"simulate", "--system", kData + "/case_a.json", "--T", "20",
                                      "--scheme", "hybrid", "--reps", "500", "--seed", "7"};
  auto args = base;
  args.insert(args.end(), {"--out", out1.string(), "--threads", "1"});
  auto r = invoke(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean T_j:") != std::string::npos);
  args = base;
  args.insert(args.end(), {"--out", out2.string(), "--threads", "3"});
  REQUIRE(invoke(args).code == 0);

  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(dir / "a.summary.csv") == slurp(dir / "b.summary.csv"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(out1).rfind("rep,R_hat,T_1,T_2,M_1_1,M_2_1,M_1_2,M_2_2\n", 0) == 0);
  const std::string sidecar = slurp(dir / "a.json");
  CHECK(sidecar.find("\"seed\": 7") != std::string::npos);
  CHECK(sidecar.find("\"version\"") != std::string::npos);
  CHECK(sidecar.find("threads") == std::string::npos);

  // Rerun from the sidecar alone.
  const auto out3 = dir / "c.csv";
  REQUIRE(invoke({"simulate", "--config", (dir / "a.json").string(), "--out", out3.string()}).code ==
          0);
  CHECK(slurp(out3) == slurp(out1));
  CHECK(slurp(dir / "c.json") == slurp(dir / "a.json"));
  CHECK(!fs::exists(dir / "a.csv.tmp"));
}

TEST_CASE("cli simulate schemes and errors") {
  const auto dir = scratch("simulate_errors");
  auto r = invoke({"simulate", "--system", kData + "/case_c.json", "--T", "20", "--scheme",
                   "fixed-split", "--T1", "4", "--reps", "50", "--out", (dir / "f.csv").string()});
  CHECK(r.code == 0);
  const std::string rows = slurp(dir / "f.csv");
  CHECK(rows.find("\n0,") != std::string::npos);

  r = invoke({"simulate", "--system", kData + "/case_c.json", "--T", "20", "--scheme", "balanced",
              "--reps", "50", "--out", (dir / "b.csv").string()});
  CHECK(r.code == 0);
  CHECK(slurp(dir / "b.csv").find(",10,10,5,5,5,5\n") != std::string::npos);

  r = invoke({"simulate", "--system", kData + "/case_a.json", "--T", "20", "--reps", "1", "--out",
              (dir / "x.csv").string()});
  CHECK(r.code == relialloc::cli::kUsage);
  CHECK(!fs::exists(dir / "x.csv"));

  r = invoke({"simulate", "--system", kData + "/case_a.json", "--T", "3", "--reps", "10", "--out",
              (dir / "y.csv").string()});
  CHECK(r.code == relialloc::cli::kInfeasible);
  CHECK(!fs::exists(dir / "y.csv"));

  r = invoke({"simulate", "--system", kData + "/case_a.json", "--T", "20", "--reps", "10", "--out",
              (dir / "missing_dir" / "z.csv").string()});
  CHECK(r.code == relialloc::cli::kOutputError);

  CHECK(invoke({"simulate", "--system", kData + "/case_a.json", "--T", "20", "--reps", "10",
                "--scheme", "fixed-split", "--out", (dir / "w.csv").string()})
            .code == relialloc::cli::kUsage);
  CHECK(invoke({"simulate", "--system", kData + "/case_a.json", "--T", "20", "--reps", "10",
                "--scheme", "greedy", "--out", (dir / "w.csv").string()})
            .code == relialloc::cli::kUsage);
}

TEST_CASE("cli seed falls back to RELIALLOC_SEED") {
  const auto dir = scratch("seed_env");
  const std::vector<std::string> base{"simulate", "--system", kData + "/case_b.json", "--T", "20",
                                      "--reps", "20"};
  ::setenv("RELIALLOC_SEED", "42", 1);
  auto a = base;
  a.insert(a.end(), {"--out", (dir / "env.csv").string()});
  REQUIRE(invoke(a).code == 0);
  ::unsetenv("RELIALLOC_SEED");
  auto b = base;
  b.insert(b.end(), {"--seed", "42", "--out", (dir / "flag.csv").string()});
  REQUIRE(invoke(b).code == 0);
  CHECK(slurp(dir / "env.csv") == slurp(dir / "flag.csv"));
  CHECK(slurp(dir / "env.json").find("\"seed\": 42") != std::string::npos);

  ::setenv("RELIALLOC_SEED", "not-a-number", 1);
  CHECK(invoke(a).code == relialloc::cli::kUsage);
  ::unsetenv("RELIALLOC_SEED");
}

TEST_CASE("cli experiment modes") {
  const auto dir = scratch("experiment");
  auto r = invoke({"experiment", "--table1", "--reps", "2000", "--seed", "3", "--out",
                   (dir / "t1.csv").string()});
  REQUIRE(r.code == 0);
  const std::string t1 = slurp(dir / "t1.csv");
  CHECK(t1.rfind("case,mean_T1,rounded_T1\nA,", 0) == 0);
  CHECK(t1.find("\nD,") != std::string::npos);

  r = invoke({"experiment", "--table1", "--system", kData + "/case_c.json", "--reps", "500",
              "--out", (dir / "t1c.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "t1c.csv").find("\ncase_c,") != std::string::npos);

  r = invoke({"experiment", "--fixed-split", "--system", kData + "/case_c.json", "--T", "20",
              "--reps", "500", "--out", (dir / "fs.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "fs.csv").rfind("T1,var_hat,se,mean_R_hat\n4,", 0) == 0);
  CHECK(slurp(dir / "fs.json").find("mean_conditional_var") != std::string::npos);

  r = invoke({"experiment", "--convergence", "--system", kData + "/convergence_default.json",
              "--sweep", "100:300:100", "--reps", "50", "--out", (dir / "cv.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "cv.csv").rfind("T,var_hat,se,Q,excess\n100,", 0) == 0);

  REQUIRE(invoke({"experiment", "--convergence", "--config", (dir / "cv.json").string(), "--out",
                  (dir / "cv2.csv").string()})
              .code == 0);
  CHECK(slurp(dir / "cv2.csv") == slurp(dir / "cv.csv"));

  CHECK(invoke({"experiment", "--table1", "--config", (dir / "cv.json").string(), "--out",
                (dir / "q.csv").string()})
            .code == relialloc::cli::kUsage);
  CHECK(invoke({"experiment", "--out", (dir / "q.csv").string()}).code == relialloc::cli::kUsage);
  CHECK(invoke({"experiment", "--fixed-split", "--table1", "--out", (dir / "q.csv").string()})
            .code == relialloc::cli::kUsage);
  CHECK(invoke({"experiment", "--fixed-split", "--system", kData + "/convergence_default.json",
                "--out", (dir / "q.csv").string()})
            .code == relialloc::cli::kUsage);
  CHECK(invoke({"experiment", "--convergence", "--sweep", "10:5:1", "--out",
                (dir / "q.csv").string()})
            .code == relialloc::cli::kUsage);
  CHECK(invoke({"experiment", "--convergence", "--sweep", "16:32:16", "--out",
                (dir / "q.csv").string()})
            .code == relialloc::cli::kInfeasible);
  CHECK(!fs::exists(dir / "q.csv"));
}
