#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "featimp/io.hpp"

#ifndef FEATIMP_CLI_PATH
#error "FEATIMP_CLI_PATH must be defined by the build"
#endif

namespace {

namespace fs = std::filesystem;

const fs::path kWorkDir = fs::temp_directory_path() / "featimp_cli_tests";

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
  const fs::path log = kWorkDir / "cli_output.txt";
  const std::string command =
      std::string(FEATIMP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

struct Fixture {
  Fixture() {
    fs::remove_all(kWorkDir);
    fs::create_directories(kWorkDir);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "help exits zero and names the subcommands") {
  const auto result = run_cli("--help");
  CHECK(result.exit_code == 0);
  for (const auto* name :
       {"generate", "cohort", "impute", "train", "importance", "experiment", "report"}) {
    CHECK(result.output.find(name) != std::string::npos);
  }
}

TEST_CASE_FIXTURE(Fixture, "missing required flag exits one and names the flag") {
  const auto result = run_cli("train --method rf");
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("--data") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "unknown flags are rejected before any work") {
  const auto result = run_cli("train --method rf --data x.csv --frobnicate 2");
  CHECK(result.exit_code == 1);
}

TEST_CASE_FIXTURE(Fixture, "unreadable paths exit two") {
  const auto result = run_cli("train --method rf --data " +
                              (kWorkDir / "does_not_exist.csv").string());
  CHECK(result.exit_code == 2);
  const auto report = run_cli("report --report " + (kWorkDir / "nope.json").string());
  CHECK(report.exit_code == 2);
}

TEST_CASE_FIXTURE(Fixture, "generate, train, and importance round-trip on disk") {
  write_file(kWorkDir / "tab.json",
             R"({"type":"tabular","spec":{"n_samples":200,"n_features":5,)"
             R"("planted_beta":[2.0,-1.0,0,0,0],"seed":4}})");
  auto result = run_cli("generate --config " + (kWorkDir / "tab.json").string() +
                        " --out-dir " + kWorkDir.string());
  REQUIRE(result.exit_code == 0);

  // The emitted CSV loads back through the library loader.
  const auto data = featimp::load_dataset((kWorkDir / "data.csv").string());
  CHECK(data.n_rows() == 200);
  CHECK(data.n_cols() == 5);

  result = run_cli("train --data " + (kWorkDir / "data.csv").string() + " --meta " +
                   (kWorkDir / "meta.json").string() +
                   " --method gbm --n-rounds 20 --out " + (kWorkDir / "model.json").string());
  REQUIRE(result.exit_code == 0);

  result = run_cli("importance --data " + (kWorkDir / "data.csv").string() + " --meta " +
                   (kWorkDir / "meta.json").string() + " --model " +
                   (kWorkDir / "model.json").string() +
                   " --measure gini --out " + (kWorkDir / "imp.csv").string());
  REQUIRE(result.exit_code == 0);
  const std::string csv = slurp(kWorkDir / "imp.csv");
  CHECK(csv.find("feature,score,method,model,seed") == 0);
  CHECK(csv.find("gini") != std::string::npos);

  // Coefficient measure on a tree model is a validation failure.
  result = run_cli("importance --data " + (kWorkDir / "data.csv").string() + " --model " +
                   (kWorkDir / "model.json").string() + " --measure coefficient --out " +
                   (kWorkDir / "imp2.csv").string());
  CHECK(result.exit_code == 1);
}

TEST_CASE_FIXTURE(Fixture, "impute subcommand fills missing cells") {
  write_file(kWorkDir / "gaps.csv", "a,b,outcome\n1,2,0\nNA,4,1\n3,NA,0\n5,8,1\n");
  const auto result =
      run_cli("impute --data " + (kWorkDir / "gaps.csv").string() + " --out " +
              (kWorkDir / "filled.csv").string() + " --method softimpute --max-rank 2");
  REQUIRE(result.exit_code == 0);
  const auto filled = featimp::load_dataset((kWorkDir / "filled.csv").string());
  CHECK(filled.x.missing_count() == 0);
}

TEST_CASE_FIXTURE(Fixture, "experiment runs byte-identically and report renders the heatmap") {
  write_file(kWorkDir / "exp.json", R"({
    "source": {"type":"tabular","spec":{"n_samples":160,"n_features":5,
               "planted_beta":[1.5,-1.0,0,0,0],"seed":2}},
    "methods": ["lr","rf","gbm"],
    "n_trials": 3,
    "cv_folds": 2,
    "master_seed": 31,
    "grids": {"lr": [{"norm":"l2","lambda":0.01}],
              "rf": [{"n_trees":15}],
              "gbm": [{"n_rounds":15}]}
  })");

  auto result = run_cli("experiment --config " + (kWorkDir / "exp.json").string() +
                        " --out-dir " + (kWorkDir / "run1").string());
  REQUIRE(result.exit_code == 0);
  result = run_cli("experiment --config " + (kWorkDir / "exp.json").string() +
                   " --out-dir " + (kWorkDir / "run2").string());
  REQUIRE(result.exit_code == 0);

  for (const auto* name : {"report.json", "aurocs.csv", "importances.csv", "correlations.csv"}) {
    CHECK(slurp(kWorkDir / "run1" / name) == slurp(kWorkDir / "run2" / name));
  }

  result = run_cli("report --report " + (kWorkDir / "run1" / "report.json").string() +
                   " --out-dir " + (kWorkDir / "rendered").string() + " --heatmap");
  REQUIRE(result.exit_code == 0);
  const std::string svg = slurp(kWorkDir / "rendered" / "heatmap.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);

  // Cell count equals outcomes x selected features (1 x 5 here).
  std::size_t cells = 0;
  for (std::size_t pos = svg.find("class=\"cell\""); pos != std::string::npos;
       pos = svg.find("class=\"cell\"", pos + 1)) {
    ++cells;
  }
  CHECK(cells == 5);
}

TEST_CASE_FIXTURE(Fixture, "seed flag overrides the config and changes outputs") {
  write_file(kWorkDir / "exp.json", R"({
    "source": {"type":"tabular","spec":{"n_samples":120,"n_features":4,
               "planted_beta":[1.0,0,0,0],"seed":2}},
    "methods": ["rf"],
    "n_trials": 2,
    "cv_folds": 2,
    "master_seed": 1,
    "grids": {"rf": [{"n_trees":10}]}
  })");
  auto result = run_cli("experiment --config " + (kWorkDir / "exp.json").string() +
                        " --seed 99 --out-dir " + (kWorkDir / "a").string());
  REQUIRE(result.exit_code == 0);
  result = run_cli("experiment --config " + (kWorkDir / "exp.json").string() +
                   " --seed 100 --out-dir " + (kWorkDir / "b").string());
  REQUIRE(result.exit_code == 0);
  CHECK(slurp(kWorkDir / "a" / "report.json") != slurp(kWorkDir / "b" / "report.json"));
}

TEST_CASE_FIXTURE(Fixture, "cohort subcommand builds a dataset from records") {
  write_file(kWorkDir / "rec.json",
             R"({"type":"records","spec":{"n_patients":220,"outcome_code":"585.9",)"
             R"("common_lab_codes":["718-7","BMI"],"rare_lab_codes":["2019-8"],)"
             R"("disease_effect":1.0,"seed":6}})");
  auto result = run_cli("generate --config " + (kWorkDir / "rec.json").string() +
                        " --out-dir " + kWorkDir.string());
  REQUIRE(result.exit_code == 0);

  write_file(kWorkDir / "cohort.json", R"({"outcome_code":"585.9","horizon_days":1})");
  result = run_cli("cohort --records " + (kWorkDir / "records.jsonl").string() +
                   " --config " + (kWorkDir / "cohort.json").string() + " --out-dir " +
                   kWorkDir.string() + " --seed 5");
  REQUIRE(result.exit_code == 0);
  const auto data = featimp::load_dataset((kWorkDir / "cohort_h1.csv").string());
  CHECK(data.n_rows() % 2 == 0);  // cases matched 1:1 with controls
  CHECK(data.n_cols() >= 5);
}

TEST_CASE_FIXTURE(Fixture, "out-dir environment override wins") {
  write_file(kWorkDir / "tab.json",
             R"({"type":"tabular","spec":{"n_samples":50,"n_features":3,"seed":1}})");
  const fs::path env_dir = kWorkDir / "env_target";
  const std::string command = "FEATIMP_OUT_DIR=" + env_dir.string() + " " +
                              std::string(FEATIMP_CLI_PATH) + " generate --config " +
                              (kWorkDir / "tab.json").string() + " --out-dir " +
                              (kWorkDir / "flag_target").string() + " > /dev/null 2>&1";
  REQUIRE(std::system(command.c_str()) == 0);
  CHECK(fs::exists(env_dir / "data.csv"));
  CHECK_FALSE(fs::exists(kWorkDir / "flag_target" / "data.csv"));
}
