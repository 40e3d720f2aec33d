#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "featimp/cohort.hpp"
#include "featimp/importance.hpp"
#include "featimp/interpret.hpp"
#include "featimp/linear.hpp"
#include "featimp/matrix.hpp"
#include "featimp/stats.hpp"
#include "featimp/synth.hpp"
#include "featimp/trees.hpp"

namespace featimp::experiment {

enum class Method { LR, RF, GBM };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// One candidate hyperparameter setting. mtry_fraction < 0 means ceil(sqrt(d));
/// otherwise mtry = max(1, round(mtry_fraction * d)).
struct LrParams {
  linear::PenaltyConfig penalty;
};
struct RfParams {
  int n_trees = 500;
  double mtry_fraction = -1.0;
  int min_samples_leaf = 1;
};
struct GbmParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double reg_lambda = 1.0;
};

struct TuningGrids {
  std::vector<LrParams> lr;
  std::vector<RfParams> rf;
  std::vector<GbmParams> gbm;
};

/// The stock grids: lambda in {1e-4..1} x {L1,L2} for LR; {100,500} trees x
/// {sqrt(d), d/3} mtry x {1,5} leaf for RF; {100,500} rounds x {0.1,0.01} lr
/// x {3,6} depth x {1,10} reg for GBM.
TuningGrids default_grids();

enum class ImputeChoice { None, Mean, SoftImpute };

struct SoftImputeSettings {
  double shrinkage_fraction = 0.1;  // of the initial top singular value
  int max_rank = 20;
  double tolerance = 1e-5;
  int max_iterations = 200;
};

/// Records-backed source: generate longitudinal records, build one cohort
/// dataset per horizon.
struct RecordsSource {
  synth::RecordsSpec records;
  cohort::CohortSpec cohort;          // horizon_days is overridden per horizon
  std::optional<cohort::LabConfig> labs;  // absent: derive by missing-rate split
};

struct ExperimentConfig {
  // Exactly one source: CSV file, tabular generator, or records pipeline.
  std::string data_csv;
  std::string meta_json;
  std::optional<synth::TabularSpec> tabular;
  std::optional<RecordsSource> records;

  std::vector<Method> methods{Method::LR, Method::RF, Method::GBM};
  std::vector<int> horizons{1, 182, 365};  // records source only
  int n_trials = 10;
  double test_fraction = 0.5;
  int cv_folds = 10;
  TuningGrids grids = default_grids();
  ImputeChoice impute = ImputeChoice::None;
  SoftImputeSettings soft_impute;
  int permutation_repeats = 1;
  std::uint64_t master_seed = 0;
  int threads = 1;
};

ExperimentConfig load_experiment_config(const std::string& path);

/// Chosen hyperparameters, serialized as flat key/value text for reporting.
using ParamMap = std::map<std::string, std::string>;

struct TrialMethodResult {
  double test_auroc = 0.0;
  ParamMap params;
  ImportanceReport internal_importance;     // coefficient (LR) or gini (RF/GBM)
  ImportanceReport permutation_importance;  // on the held-out test set
};

struct TrialResult {
  int trial = 0;
  std::vector<TrialMethodResult> methods;  // aligned with config.methods
  ImportanceReport univariate;             // screen on the standardized train set
};

struct HorizonResult {
  int horizon_days = 0;
  std::string outcome;  // dataset label, e.g. "250.00@365d" or "tabular"
  std::vector<TrialResult> trials;
};

struct MethodComparison {
  int horizon_days = 0;
  Method method_a = Method::LR;
  Method method_b = Method::LR;
  stats::TestResult test;
};

struct BiclusterSection {
  std::string model_kind;  // model whose permutation importances are clustered
  std::vector<std::string> outcomes;
  std::vector<std::string> features;  // selected top features
  FeatureMatrix values;               // outcomes x features mean permutation importance
  interpret::BiclusterResult clustering;
};

struct ExperimentReport {
  std::vector<std::string> feature_names;
  std::vector<Method> methods;
  std::vector<HorizonResult> horizons;
  std::vector<MethodComparison> comparisons;  // Bonferroni-adjusted as a family
  interpret::CorrelationMatrix correlation;   // measures pooled across horizons
  BiclusterSection bicluster;
  std::uint64_t master_seed = 0;
};

/// Index of the grid-point with the best mean validation AUROC under
/// stratified k-fold CV; ties broken by grid order. Deterministic per seed.
struct TuneResult {
  std::size_t best_index = 0;
  std::vector<double> mean_auroc;  // per grid point
};

TuneResult cross_validate_tune(const LabeledDataset& train, Method method,
                               const TuningGrids& grids, int folds, std::uint64_t seed,
                               int threads = 1);

/// Runs the full protocol: per trial split/impute/standardize/tune/refit,
/// AUROC on the test half, internal importance on the training fit,
/// permutation importance on the test set; then pairwise Wilcoxon + Bonferroni
/// per horizon, the pooled importance correlation matrix, and the bicluster of
/// mean permutation importances. Fully deterministic from master_seed.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Seed for one (horizon, trial) cell; exposed so tests can replay splits.
std::uint64_t trial_seed(std::uint64_t master_seed, int horizon_days, int trial);

/// Canonical JSON document; byte-identical for identical reports.
std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json_file(const std::string& path);

/// report.json plus aurocs.csv, importances.csv, correlations.csv.
void write_report_files(const ExperimentReport& report, const std::string& out_dir);

}  // namespace featimp::experiment
