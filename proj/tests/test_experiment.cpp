#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "featimp/experiment.hpp"
#include "featimp/io.hpp"
#include "featimp/preprocess.hpp"
#include "featimp/rng.hpp"
#include "test_util.hpp"

using namespace featimp;
using namespace featimp::experiment;

namespace {

synth::TabularSpec small_signal_spec(std::uint64_t seed) {
  synth::TabularSpec spec;
  spec.n_samples = 240;
  spec.n_features = 6;
  spec.planted_beta = {1.5, -1.0, 0.0, 0.0, 0.0, 0.0};
  spec.seed = seed;
  return spec;
}

ExperimentConfig fast_config() {
  ExperimentConfig config;
  config.tabular = small_signal_spec(11);
  config.n_trials = 3;
  config.cv_folds = 3;
  config.horizons = {0};
  config.master_seed = 5;
  config.grids.lr = {{{linear::PenaltyNorm::L2, 0.01}}};
  config.grids.rf = {{20, -1.0, 1}};
  config.grids.gbm = {{20, 0.1, 3, 1.0}};
  return config;
}

}  // namespace

TEST_CASE("grid of size one is returned without cross validation") {
  const auto data = synth::generate_tabular(small_signal_spec(1));
  TuningGrids grids;
  grids.rf = {{10, -1.0, 1}};
  const auto result = cross_validate_tune(data, Method::RF, grids, 5, 3);
  CHECK(result.best_index == 0);
  CHECK(result.mean_auroc.empty());
}

TEST_CASE("degenerate lasso loses the tuning contest to ridge on planted data") {
  TuningGrids grids;
  grids.lr = {{{linear::PenaltyNorm::L1, 1e6}}, {{linear::PenaltyNorm::L2, 0.01}}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = synth::generate_tabular(small_signal_spec(100 + seed));
    const auto result = cross_validate_tune(data, Method::LR, grids, 3, seed);
    CHECK(result.best_index == 1);  // the saturated lasso predicts 0.5 everywhere
    CHECK(result.mean_auroc[0] == doctest::Approx(0.5).epsilon(0.02));
  }
}

TEST_CASE("empty grids and infeasible folds are rejected") {
  const auto data = synth::generate_tabular(small_signal_spec(2));
  TuningGrids empty;
  empty.lr.clear();
  CHECK_THROWS_AS(cross_validate_tune(data, Method::LR, empty, 3, 1), ValidationError);

  TuningGrids grids;
  grids.lr = {{{linear::PenaltyNorm::L2, 0.01}}, {{linear::PenaltyNorm::L2, 0.1}}};
  CHECK_THROWS_AS(cross_validate_tune(data, Method::LR, grids, 9999, 1), ValidationError);
}

TEST_CASE("report has one auroc cell per method and trial and shared feature order") {
  auto config = fast_config();
  config.n_trials = 10;
  const auto report = run_experiment(config);

  REQUIRE(report.horizons.size() == 1);
  CHECK(report.horizons[0].trials.size() == 10);
  std::size_t cells = 0;
  for (const auto& trial : report.horizons[0].trials) {
    cells += trial.methods.size();
    for (const auto& cell : trial.methods) {
      CHECK(cell.internal_importance.feature_names == report.feature_names);
      CHECK(cell.permutation_importance.feature_names == report.feature_names);
      CHECK(cell.test_auroc >= 0.0);
      CHECK(cell.test_auroc <= 1.0);
    }
    CHECK(trial.univariate.feature_names == report.feature_names);
  }
  CHECK(cells == 30);  // 10 trials x 3 methods
}

TEST_CASE("identical config and master seed give byte-identical reports") {
  const auto config = fast_config();
  const auto a = report_to_json(run_experiment(config));
  const auto b = report_to_json(run_experiment(config));
  CHECK(a == b);
}

TEST_CASE("worker count never changes the report") {
  auto config = fast_config();
  config.permutation_repeats = 2;
  config.threads = 1;
  const auto serial = report_to_json(run_experiment(config));
  config.threads = 4;
  const auto threaded = report_to_json(run_experiment(config));
  CHECK(serial == threaded);
}

TEST_CASE("comparisons cover method pairs with adjusted p at least unadjusted") {
  const auto report = run_experiment(fast_config());
  CHECK(report.comparisons.size() == 3);  // lr-rf, lr-gbm, rf-gbm
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& cmp : report.comparisons) {
    pairs.insert({to_string(cmp.method_a), to_string(cmp.method_b)});
    REQUIRE(cmp.test.p_adjusted.has_value());
    CHECK(*cmp.test.p_adjusted >= cmp.test.p_value);
    CHECK(*cmp.test.p_adjusted <= 1.0);
  }
  CHECK(pairs.size() == 3);
}

TEST_CASE("correlation section carries one row per measure") {
  const auto report = run_experiment(fast_config());
  // 3 methods x (internal + permutation) + univariate = 7 measures.
  REQUIRE(report.correlation.labels.size() == 7);
  CHECK(report.correlation.labels[0] == "lr_coefficient");
  CHECK(report.correlation.labels[1] == "lr_permutation");
  CHECK(report.correlation.labels[2] == "rf_gini");
  CHECK(report.correlation.labels[6] == "univariate");
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(report.correlation.r[i][i] == 1.0);
  }
}

TEST_CASE("bicluster section prefers the forest and orders selected features") {
  const auto report = run_experiment(fast_config());
  CHECK(report.bicluster.model_kind == "rf");
  CHECK(report.bicluster.outcomes == std::vector<std::string>{"tabular"});
  CHECK(report.bicluster.features.size() == 6);  // d < 20: everything selected
  CHECK(report.bicluster.values.n_rows() == 1);
  CHECK(report.bicluster.values.n_cols() == 6);
  // Selection is by descending importance: the planted features come first.
  const std::set<std::string> top2{report.bicluster.features[0],
                                   report.bicluster.features[1]};
  CHECK(top2 == std::set<std::string>{"x0", "x1"});
}

TEST_CASE("no test-set value reaches training artifacts") {
  auto config = fast_config();
  config.n_trials = 1;
  const auto base_data = synth::generate_tabular(*config.tabular);
  const auto base_report = run_experiment(config);

  // Replay the trial-0 split and plant a sentinel in every test row.
  const auto split =
      split_train_test(base_data, config.test_fraction, trial_seed(config.master_seed, 0, 0));
  auto poisoned = base_data;
  for (const std::size_t row : split.test_indices) {
    for (std::size_t j = 0; j < poisoned.n_cols(); ++j) {
      poisoned.x.at(row, j) = poisoned.x.at(row, j) * 3.0 + 100.0;
    }
  }
  // Feed the poisoned matrix through a CSV source to avoid regenerating.
  const auto dir = std::filesystem::temp_directory_path() / "featimp_canary";
  std::filesystem::create_directories(dir);
  save_dataset((dir / "data.csv").string(), poisoned);
  save_feature_meta((dir / "meta.json").string(), poisoned.meta);
  save_dataset((dir / "base.csv").string(), base_data);

  ExperimentConfig csv_config = config;
  csv_config.tabular.reset();
  csv_config.data_csv = (dir / "base.csv").string();
  csv_config.meta_json = (dir / "meta.json").string();
  const auto clean_report = run_experiment(csv_config);

  csv_config.data_csv = (dir / "data.csv").string();
  const auto poisoned_report = run_experiment(csv_config);

  const auto& clean = clean_report.horizons[0].trials[0];
  const auto& dirty = poisoned_report.horizons[0].trials[0];
  for (std::size_t m = 0; m < clean.methods.size(); ++m) {
    // Training-side artifacts must be unchanged by test-row perturbation.
    CHECK(clean.methods[m].params == dirty.methods[m].params);
    CHECK(clean.methods[m].internal_importance.scores ==
          dirty.methods[m].internal_importance.scores);
  }
  CHECK(clean.univariate.scores == dirty.univariate.scores);
}

TEST_CASE("records source builds one dataset per horizon deterministically") {
  ExperimentConfig config;
  RecordsSource source;
  source.records.n_patients = 260;
  source.records.common_lab_codes = {"718-7", "2345-7", "BMI"};
  source.records.rare_lab_codes = {"10330-9"};
  source.records.disease_effect = 1.0;
  source.records.seed = 33;
  source.cohort.outcome_code = source.records.outcome_code;
  config.records = source;
  config.impute = ImputeChoice::SoftImpute;
  config.horizons = {1, 182};
  config.n_trials = 2;
  config.cv_folds = 2;
  config.methods = {Method::RF};
  config.grids.rf = {{15, -1.0, 2}};
  config.master_seed = 9;

  const auto report = run_experiment(config);
  REQUIRE(report.horizons.size() == 2);
  CHECK(report.horizons[0].outcome == "250.00@1d");
  CHECK(report.horizons[1].outcome == "250.00@182d");
  CHECK(report.horizons[0].trials.size() == 2);
  CHECK(report.bicluster.values.n_rows() == 2);

  const auto again = run_experiment(config);
  CHECK(report_to_json(report) == report_to_json(again));
}

TEST_CASE("missing data without imputation aborts with trial context") {
  ExperimentConfig config = fast_config();
  config.tabular->missing_rate = 0.1;
  config.impute = ImputeChoice::None;
  try {
    run_experiment(config);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("trial 0") != std::string::npos);
  }
}

TEST_CASE("config loader round-trips the documented keys") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "featimp_exp_config.json").string();
  std::ofstream out(path);
  out << R"({
    "source": {"type": "tabular",
               "spec": {"n_samples": 100, "n_features": 4,
                        "planted_beta": [1.0, 0, 0, 0],
                        "interactions": [{"a": 0, "b": 1, "beta": 2.0}],
                        "seed": 3}},
    "methods": ["rf", "lr"],
    "n_trials": 4,
    "test_fraction": 0.4,
    "cv_folds": 2,
    "impute": "mean",
    "permutation_repeats": 2,
    "master_seed": 77,
    "grids": {"lr": [{"norm": "l1", "lambda": 0.5}],
              "rf": [{"n_trees": 9, "mtry_fraction": 0.5, "min_samples_leaf": 3}],
              "gbm": [{"n_rounds": 7, "learning_rate": 0.2, "max_depth": 2, "reg_lambda": 4.0}]}
  })";
  out.close();

  const auto config = load_experiment_config(path);
  REQUIRE(config.tabular.has_value());
  CHECK(config.tabular->n_samples == 100);
  CHECK(config.tabular->interactions.size() == 1);
  CHECK(config.methods == std::vector<Method>{Method::RF, Method::LR});
  CHECK(config.n_trials == 4);
  CHECK(config.test_fraction == 0.4);
  CHECK(config.impute == ImputeChoice::Mean);
  CHECK(config.permutation_repeats == 2);
  CHECK(config.master_seed == 77);
  REQUIRE(config.grids.lr.size() == 1);
  CHECK(config.grids.lr[0].penalty.norm == linear::PenaltyNorm::L1);
  CHECK(config.grids.rf[0].n_trees == 9);
  CHECK(config.grids.gbm[0].reg_lambda == 4.0);

  CHECK_THROWS_AS(load_experiment_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("a single-feature dataset still produces a full report") {
  ExperimentConfig config;
  synth::TabularSpec spec;
  spec.n_samples = 120;
  spec.n_features = 1;
  spec.planted_beta = {1.5};
  spec.seed = 8;
  config.tabular = spec;
  config.methods = {Method::RF};
  config.n_trials = 2;
  config.cv_folds = 2;
  config.grids.rf = {{10, -1.0, 1}};
  const auto report = run_experiment(config);
  CHECK(report.correlation.labels.size() == 3);  // rf_gini, rf_permutation, univariate
  for (bool flag : report.correlation.degenerate) {
    CHECK(flag);
  }
  CHECK(report.bicluster.features == std::vector<std::string>{"x0"});
}

TEST_CASE("default grids match the documented shapes") {
  const auto grids = default_grids();
  CHECK(grids.lr.size() == 10);   // 5 lambdas x 2 norms
  CHECK(grids.rf.size() == 8);    // 2 x 2 x 2
  CHECK(grids.gbm.size() == 16);  // 2 x 2 x 2 x 2
}

TEST_CASE("report json round-trips through the file loader") {
  const auto report = run_experiment(fast_config());
  const auto dir = std::filesystem::temp_directory_path() / "featimp_report_roundtrip";
  write_report_files(report, dir.string());
  const auto loaded = report_from_json_file((dir / "report.json").string());
  CHECK(report_to_json(loaded) == report_to_json(report));
  CHECK(std::filesystem::exists(dir / "aurocs.csv"));
  CHECK(std::filesystem::exists(dir / "importances.csv"));
  CHECK(std::filesystem::exists(dir / "correlations.csv"));
}
