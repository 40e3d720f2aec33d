#include "featimp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "featimp/impute.hpp"
#include "featimp/io.hpp"
#include "featimp/preprocess.hpp"
#include "featimp/rng.hpp"

namespace featimp::experiment {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Method m) {
  switch (m) {
    case Method::LR:
      return "lr";
    case Method::RF:
      return "rf";
    case Method::GBM:
      return "gbm";
  }
  return "lr";
}

Method method_from_string(const std::string& s) {
  if (s == "lr") {
    return Method::LR;
  }
  if (s == "rf") {
    return Method::RF;
  }
  if (s == "gbm") {
    return Method::GBM;
  }
  throw ValidationError("unknown method: " + s);
}

TuningGrids default_grids() {
  TuningGrids grids;
  for (const auto norm : {linear::PenaltyNorm::L1, linear::PenaltyNorm::L2}) {
    for (const double lambda : {0.0001, 0.001, 0.01, 0.1, 1.0}) {
      grids.lr.push_back({{norm, lambda}});
    }
  }
  for (const int n_trees : {100, 500}) {
    for (const double mtry_fraction : {-1.0, 1.0 / 3.0}) {
      for (const int min_leaf : {1, 5}) {
        grids.rf.push_back({n_trees, mtry_fraction, min_leaf});
      }
    }
  }
  for (const int n_rounds : {100, 500}) {
    for (const double lr : {0.1, 0.01}) {
      for (const int depth : {3, 6}) {
        for (const double reg : {1.0, 10.0}) {
          grids.gbm.push_back({n_rounds, lr, depth, reg});
        }
      }
    }
  }
  return grids;
}

std::uint64_t trial_seed(std::uint64_t master_seed, int horizon_days, int trial) {
  return rng::mix({master_seed, 0x721A1ULL, static_cast<std::uint64_t>(horizon_days),
                   static_cast<std::uint64_t>(trial)});
}

namespace {

constexpr std::uint64_t kTuneStream = 0x70E1ULL;
constexpr std::uint64_t kFitStream = 0xF170ULL;
constexpr std::uint64_t kPermStream = 0x9E41ULL;
constexpr std::uint64_t kMatchStream = 0xCA5EULL;

int resolve_grid_mtry(double mtry_fraction, std::size_t d) {
  if (mtry_fraction < 0.0) {
    return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  }
  const int m = static_cast<int>(std::lround(mtry_fraction * static_cast<double>(d)));
  return std::clamp(m, 1, static_cast<int>(d));
}

trees::ForestConfig forest_config(const RfParams& params, std::size_t d, std::uint64_t seed) {
  trees::ForestConfig config;
  config.n_trees = params.n_trees;
  config.mtry = resolve_grid_mtry(params.mtry_fraction, d);
  config.min_samples_leaf = params.min_samples_leaf;
  config.seed = seed;
  return config;
}

trees::BoostConfig boost_config(const GbmParams& params, std::uint64_t seed) {
  trees::BoostConfig config;
  config.n_rounds = params.n_rounds;
  config.learning_rate = params.learning_rate;
  config.max_depth = params.max_depth;
  config.reg_lambda = params.reg_lambda;
  config.seed = seed;
  return config;
}

ParamMap lr_param_map(const LrParams& p) {
  return {{"norm", linear::to_string(p.penalty.norm)},
          {"lambda", format_double(p.penalty.lambda)}};
}

ParamMap rf_param_map(const RfParams& p, std::size_t d) {
  return {{"n_trees", std::to_string(p.n_trees)},
          {"mtry", std::to_string(resolve_grid_mtry(p.mtry_fraction, d))},
          {"min_samples_leaf", std::to_string(p.min_samples_leaf)}};
}

ParamMap gbm_param_map(const GbmParams& p) {
  return {{"n_rounds", std::to_string(p.n_rounds)},
          {"learning_rate", format_double(p.learning_rate)},
          {"max_depth", std::to_string(p.max_depth)},
          {"reg_lambda", format_double(p.reg_lambda)}};
}

std::size_t grid_size(const TuningGrids& grids, Method method) {
  switch (method) {
    case Method::LR:
      return grids.lr.size();
    case Method::RF:
      return grids.rf.size();
    case Method::GBM:
      return grids.gbm.size();
  }
  return 0;
}

/// Fits one method/grid-point on a training set and scores a validation set.
/// LR standardizes the training part and applies those stats to validation.
double fit_and_score(Method method, const TuningGrids& grids, std::size_t grid_index,
                     const LabeledDataset& fit_part, const LabeledDataset& val_part,
                     std::uint64_t seed, int threads) {
  std::vector<double> probs;
  switch (method) {
    case Method::LR: {
      auto [std_x, stats] = standardize(fit_part.x);
      LabeledDataset std_train{std::move(std_x), fit_part.y, fit_part.meta};
      const auto model = linear::fit_logistic(std_train, grids.lr[grid_index].penalty);
      const FeatureMatrix val_x = standardize(val_part.x, stats).first;
      probs = linear::predict_proba(model, val_x);
      break;
    }
    case Method::RF: {
      const auto model = trees::fit_random_forest(
          fit_part, forest_config(grids.rf[grid_index], fit_part.n_cols(), seed), threads);
      probs = trees::predict_proba(model, val_part.x);
      break;
    }
    case Method::GBM: {
      const auto model =
          trees::fit_gradient_boosting(fit_part, boost_config(grids.gbm[grid_index], seed));
      probs = trees::predict_proba(model, val_part.x);
      break;
    }
  }
  return stats::auroc(probs, val_part.y).auroc;
}

}  // namespace

TuneResult cross_validate_tune(const LabeledDataset& train, Method method,
                               const TuningGrids& grids, int folds, std::uint64_t seed,
                               int threads) {
  const std::size_t n_points = grid_size(grids, method);
  if (n_points == 0) {
    throw ValidationError("cross_validate_tune: empty grid for " + to_string(method));
  }
  TuneResult result;
  if (n_points == 1) {
    return result;  // nothing to tune
  }
  train.require_complete("cross_validate_tune");
  train.require_both_classes("cross_validate_tune");

  const std::vector<int> fold_of =
      stratified_folds(train.y, folds, rng::mix({seed, 0xCFULL}));

  result.mean_auroc.assign(n_points, 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit_rows;
    std::vector<std::size_t> val_rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      (fold_of[i] == f ? val_rows : fit_rows).push_back(i);
    }
    const LabeledDataset fit_part = train.subset(fit_rows);
    const LabeledDataset val_part = train.subset(val_rows);
    for (std::size_t g = 0; g < n_points; ++g) {
      result.mean_auroc[g] +=
          fit_and_score(method, grids, g, fit_part, val_part,
                        rng::mix({seed, static_cast<std::uint64_t>(g),
                                  static_cast<std::uint64_t>(f)}),
                        threads);
    }
  }
  for (double& v : result.mean_auroc) {
    v /= static_cast<double>(folds);
  }
  result.best_index = 0;
  for (std::size_t g = 1; g < n_points; ++g) {
    if (result.mean_auroc[g] > result.mean_auroc[result.best_index]) {
      result.best_index = g;
    }
  }
  return result;
}

namespace {

struct SourceDataset {
  int horizon_days = 0;
  std::string outcome;
  LabeledDataset data;  // may contain missing cells
};

std::vector<SourceDataset> build_sources(const ExperimentConfig& config) {
  const int sources = (config.data_csv.empty() ? 0 : 1) + (config.tabular ? 1 : 0) +
                      (config.records ? 1 : 0);
  if (sources != 1) {
    throw ValidationError("experiment: exactly one data source must be configured");
  }

  std::vector<SourceDataset> out;
  if (!config.data_csv.empty()) {
    std::vector<FeatureMeta> meta;
    if (!config.meta_json.empty()) {
      meta = load_feature_meta(config.meta_json);
    }
    out.push_back({0, "file",
                   load_dataset(config.data_csv, config.meta_json.empty() ? nullptr : &meta)});
  } else if (config.tabular) {
    out.push_back({0, "tabular", synth::generate_tabular(*config.tabular)});
  } else {
    const auto& source = *config.records;
    const auto records = synth::generate_records(source.records);
    const cohort::RecordIndex index(records);
    // One lab panel for every horizon; otherwise a borderline missing rate
    // could flip a code between the common and rare lists and change the
    // feature set mid-experiment.
    std::optional<cohort::LabConfig> labs = source.labs;
    for (const int horizon : config.horizons) {
      cohort::CohortSpec spec = source.cohort;
      spec.horizon_days = horizon;
      const auto classified = cohort::classify_patients(records, spec);
      const auto matched = cohort::match_controls(
          classified.cases, classified.control_pool, index,
          rng::mix({config.master_seed, kMatchStream, static_cast<std::uint64_t>(horizon)}));
      std::vector<cohort::CohortMember> members = matched.cases;
      members.insert(members.end(), matched.controls.begin(), matched.controls.end());
      if (members.empty()) {
        throw ValidationError("experiment: horizon " + std::to_string(horizon) +
                              " produced an empty cohort");
      }
      if (!labs) {
        const auto rates = cohort::lab_missing_rates(members, index);
        labs = cohort::split_common_rare(rates, spec.common_missing_threshold);
      }
      auto extracted = cohort::extract_features(members, index, spec, *labs);
      LabeledDataset data{std::move(extracted.x), std::move(extracted.labels),
                          std::move(extracted.meta)};
      out.push_back({horizon, spec.outcome_code + "@" + std::to_string(horizon) + "d",
                     std::move(data)});
    }
  }
  return out;
}

struct ImputeArtifacts {
  LabeledDataset train;
  LabeledDataset test;
};

ImputeArtifacts impute_split(const ExperimentConfig& config, LabeledDataset train,
                             LabeledDataset test) {
  const bool train_missing = train.x.has_missing();
  const bool test_missing = test.x.has_missing();
  if (config.impute == ImputeChoice::None) {
    if (train_missing || test_missing) {
      throw ValidationError(
          "experiment: dataset contains missing values but imputation is disabled");
    }
    return {std::move(train), std::move(test)};
  }
  if (!train_missing && !test_missing) {
    return {std::move(train), std::move(test)};
  }
  if (config.impute == ImputeChoice::Mean) {
    const auto means = impute::observed_column_means(train.x);
    train.x = impute::fill_missing_with(train.x, means);
    test.x = impute::fill_missing_with(test.x, means);
    return {std::move(train), std::move(test)};
  }
  impute::SoftImputeConfig si;
  si.shrinkage =
      config.soft_impute.shrinkage_fraction * impute::initial_singular_scale(train.x);
  si.max_rank = std::min<int>(config.soft_impute.max_rank,
                              static_cast<int>(std::min(train.n_rows(), train.n_cols())));
  si.tolerance = config.soft_impute.tolerance;
  si.max_iterations = config.soft_impute.max_iterations;
  auto fit = impute::soft_impute(train.x, si);
  train.x = fit.completed;
  test.x = impute::complete_rows(fit, test.x);
  return {std::move(train), std::move(test)};
}

std::size_t tuned_index(const ExperimentConfig& config, Method method,
                        const LabeledDataset& train, std::uint64_t seed) {
  if (grid_size(config.grids, method) == 1) {
    return 0;
  }
  return cross_validate_tune(train, method, config.grids, config.cv_folds, seed,
                             config.threads)
      .best_index;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.n_trials < 1) {
    throw ValidationError("experiment: n_trials must be >= 1");
  }
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw ValidationError("experiment: test_fraction must lie in (0, 1)");
  }
  if (config.cv_folds < 2) {
    throw ValidationError("experiment: cv_folds must be >= 2");
  }
  if (config.methods.empty()) {
    throw ValidationError("experiment: at least one method is required");
  }
  {
    std::set<Method> unique(config.methods.begin(), config.methods.end());
    if (unique.size() != config.methods.size()) {
      throw ValidationError("experiment: duplicate methods configured");
    }
  }

  const std::vector<SourceDataset> sources = build_sources(config);

  ExperimentReport report;
  report.master_seed = config.master_seed;
  report.methods = config.methods;
  report.feature_names = sources.front().data.feature_names();
  for (const auto& source : sources) {
    if (source.data.feature_names() != report.feature_names) {
      throw ValidationError("experiment: feature sets differ across horizons");
    }
  }

  for (const auto& source : sources) {
    HorizonResult horizon;
    horizon.horizon_days = source.horizon_days;
    horizon.outcome = source.outcome;

    for (int t = 0; t < config.n_trials; ++t) {
      const std::uint64_t seed_t = trial_seed(config.master_seed, source.horizon_days, t);
      try {
        auto split = split_train_test(source.data, config.test_fraction, seed_t);
        auto [train, test] =
            impute_split(config, std::move(split.train), std::move(split.test));

        auto [train_std_x, stats] = standardize(train.x);
        const LabeledDataset train_std{std::move(train_std_x), train.y, train.meta};
        const LabeledDataset test_std{standardize(test.x, stats).first, test.y, test.meta};

        TrialResult trial;
        trial.trial = t;
        trial.univariate = linear::univariate_screen(train_std);

        for (std::size_t m = 0; m < config.methods.size(); ++m) {
          const Method method = config.methods[m];
          const std::uint64_t tune_seed =
              rng::mix({seed_t, kTuneStream, static_cast<std::uint64_t>(m)});
          const std::uint64_t fit_seed =
              rng::mix({seed_t, kFitStream, static_cast<std::uint64_t>(m)});
          const std::uint64_t perm_seed =
              rng::mix({seed_t, kPermStream, static_cast<std::uint64_t>(m)});

          TrialMethodResult cell;
          interpret::Predictor predictor = [&]() -> interpret::Predictor {
            switch (method) {
              case Method::LR: {
                const std::size_t best = tuned_index(config, method, train, tune_seed);
                cell.params = lr_param_map(config.grids.lr[best]);
                return interpret::Predictor(
                    linear::fit_logistic(train_std, config.grids.lr[best].penalty));
              }
              case Method::RF: {
                const std::size_t best = tuned_index(config, method, train, tune_seed);
                cell.params = rf_param_map(config.grids.rf[best], train.n_cols());
                return interpret::Predictor(trees::fit_random_forest(
                    train, forest_config(config.grids.rf[best], train.n_cols(), fit_seed),
                    config.threads));
              }
              case Method::GBM:
              default: {
                const std::size_t best = tuned_index(config, method, train, tune_seed);
                cell.params = gbm_param_map(config.grids.gbm[best]);
                return interpret::Predictor(trees::fit_gradient_boosting(
                    train, boost_config(config.grids.gbm[best], fit_seed)));
              }
            }
          }();

          const LabeledDataset& test_view = method == Method::LR ? test_std : test;
          const LabeledDataset& train_view = method == Method::LR ? train_std : train;

          cell.test_auroc =
              stats::auroc(predictor.predict_proba(test_view.x), test_view.y).auroc;
          if (method == Method::LR) {
            cell.internal_importance = linear::coefficient_importance(
                *predictor.linear_model(), train_view.meta);
          } else {
            cell.internal_importance =
                trees::gini_importance(*predictor.ensemble_model(), train_view.meta);
          }
          cell.permutation_importance = interpret::permutation_importance(
              predictor, test_view, perm_seed, config.permutation_repeats, config.threads);
          trial.methods.push_back(std::move(cell));
        }
        horizon.trials.push_back(std::move(trial));
      } catch (const ValidationError& e) {
        throw ValidationError("horizon " + std::to_string(source.horizon_days) + " trial " +
                              std::to_string(t) + ": " + e.what());
      }
    }
    report.horizons.push_back(std::move(horizon));
  }

  // Pairwise method comparisons per horizon, Bonferroni over the whole family.
  std::vector<double> family_p;
  for (const auto& horizon : report.horizons) {
    for (std::size_t a = 0; a < config.methods.size(); ++a) {
      for (std::size_t b = a + 1; b < config.methods.size(); ++b) {
        std::vector<double> auroc_a;
        std::vector<double> auroc_b;
        for (const auto& trial : horizon.trials) {
          auroc_a.push_back(trial.methods[a].test_auroc);
          auroc_b.push_back(trial.methods[b].test_auroc);
        }
        MethodComparison cmp;
        cmp.horizon_days = horizon.horizon_days;
        cmp.method_a = config.methods[a];
        cmp.method_b = config.methods[b];
        cmp.test = stats::wilcoxon_rank_sum(auroc_a, auroc_b);
        family_p.push_back(cmp.test.p_value);
        report.comparisons.push_back(std::move(cmp));
      }
    }
  }
  const std::vector<double> adjusted = stats::bonferroni(family_p);
  for (std::size_t i = 0; i < report.comparisons.size(); ++i) {
    report.comparisons[i].test.p_adjusted = adjusted[i];
  }

  // Pooled correlation matrix: per measure, per horizon mean over trials,
  // z-scored, concatenated across horizons.
  const std::size_t d = report.feature_names.size();
  const auto mean_scores = [&](const HorizonResult& horizon, std::size_t method_index,
                               bool permutation) {
    std::vector<double> mean(d, 0.0);
    for (const auto& trial : horizon.trials) {
      const auto& scores = permutation
                               ? trial.methods[method_index].permutation_importance.scores
                               : trial.methods[method_index].internal_importance.scores;
      for (std::size_t j = 0; j < d; ++j) {
        mean[j] += scores[j];
      }
    }
    for (double& v : mean) {
      v /= static_cast<double>(horizon.trials.size());
    }
    return mean;
  };
  const auto zscore = [](std::vector<double> v) {
    double mean = 0.0;
    for (double x : v) {
      mean += x;
    }
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) {
      var += (x - mean) * (x - mean);
    }
    var /= static_cast<double>(v.size());
    if (var <= 0.0) {
      std::fill(v.begin(), v.end(), 0.0);
      return v;
    }
    const double inv = 1.0 / std::sqrt(var);
    for (double& x : v) {
      x = (x - mean) * inv;
    }
    return v;
  };

  std::vector<ImportanceReport> measures;
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    for (const bool permutation : {false, true}) {
      ImportanceReport pooled;
      pooled.method = permutation ? ImportanceMethod::Permutation
                     : config.methods[m] == Method::LR ? ImportanceMethod::Coefficient
                                                       : ImportanceMethod::Gini;
      pooled.model_kind = to_string(config.methods[m]);
      for (const auto& horizon : report.horizons) {
        const auto z = zscore(mean_scores(horizon, m, permutation));
        pooled.scores.insert(pooled.scores.end(), z.begin(), z.end());
      }
      measures.push_back(std::move(pooled));
    }
  }
  {
    ImportanceReport pooled;
    pooled.method = ImportanceMethod::Univariate;
    for (const auto& horizon : report.horizons) {
      std::vector<double> mean(d, 0.0);
      for (const auto& trial : horizon.trials) {
        for (std::size_t j = 0; j < d; ++j) {
          mean[j] += trial.univariate.scores[j];
        }
      }
      for (double& v : mean) {
        v /= static_cast<double>(horizon.trials.size());
      }
      const auto z = zscore(std::move(mean));
      pooled.scores.insert(pooled.scores.end(), z.begin(), z.end());
    }
    measures.push_back(std::move(pooled));
  }
  if (measures.front().scores.size() >= 2) {
    report.correlation = interpret::importance_correlation(measures);
  } else {
    // Single pooled value per measure: correlation is undefined everywhere.
    for (const auto& m : measures) {
      report.correlation.labels.push_back(
          m.model_kind.empty() ? to_string(m.method) : m.model_kind + "_" + to_string(m.method));
      report.correlation.degenerate.push_back(true);
    }
    report.correlation.r.assign(measures.size(),
                                std::vector<double>(measures.size(), 0.0));
    for (std::size_t i = 0; i < measures.size(); ++i) {
      report.correlation.r[i][i] = 1.0;
    }
  }

  // Bicluster of mean permutation importances for the preferred tree model.
  std::size_t bicluster_method = 0;
  for (const Method preferred : {Method::RF, Method::GBM, Method::LR}) {
    const auto it = std::find(config.methods.begin(), config.methods.end(), preferred);
    if (it != config.methods.end()) {
      bicluster_method = static_cast<std::size_t>(it - config.methods.begin());
      break;
    }
  }
  report.bicluster.model_kind = to_string(config.methods[bicluster_method]);

  std::vector<std::vector<double>> outcome_scores;
  for (const auto& horizon : report.horizons) {
    outcome_scores.push_back(mean_scores(horizon, bicluster_method, true));
    report.bicluster.outcomes.push_back(horizon.outcome);
  }
  ImportanceReport selector;
  selector.feature_names = report.feature_names;
  selector.scores.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double best = outcome_scores[0][j];
    for (const auto& row : outcome_scores) {
      best = std::max(best, row[j]);
    }
    selector.scores[j] = best;
  }
  const std::size_t k = std::min<std::size_t>(20, d);
  const std::vector<std::size_t> selected = interpret::top_k_features(selector, k);

  report.bicluster.values = FeatureMatrix(outcome_scores.size(), selected.size());
  for (std::size_t r = 0; r < outcome_scores.size(); ++r) {
    for (std::size_t c = 0; c < selected.size(); ++c) {
      report.bicluster.values.at(r, c) = outcome_scores[r][selected[c]];
    }
  }
  for (std::size_t c : selected) {
    report.bicluster.features.push_back(report.feature_names[c]);
  }
  report.bicluster.clustering = interpret::bicluster(report.bicluster.values);

  return report;
}

// --- configuration loading ---------------------------------------------------

namespace {

synth::TabularSpec tabular_spec_from_json(const json& doc) {
  synth::TabularSpec spec;
  spec.n_samples = doc.at("n_samples").get<std::size_t>();
  spec.n_features = doc.at("n_features").get<std::size_t>();
  if (doc.contains("planted_beta")) {
    spec.planted_beta = doc["planted_beta"].get<std::vector<double>>();
  }
  if (doc.contains("correlated_blocks")) {
    for (const auto& item : doc["correlated_blocks"]) {
      synth::CorrelatedBlock block;
      block.features = item.at("features").get<std::vector<std::size_t>>();
      block.rho = item.at("rho").get<double>();
      spec.correlated_blocks.push_back(std::move(block));
    }
  }
  if (doc.contains("categorical_levels")) {
    spec.categorical_levels = doc["categorical_levels"].get<std::vector<int>>();
  }
  if (doc.contains("interactions")) {
    for (const auto& item : doc["interactions"]) {
      spec.interactions.push_back({item.at("a").get<std::size_t>(),
                                   item.at("b").get<std::size_t>(),
                                   item.at("beta").get<double>()});
    }
  }
  spec.missing_rate = doc.value("missing_rate", 0.0);
  spec.seed = doc.value("seed", std::uint64_t{0});
  return spec;
}

synth::RecordsSpec records_spec_from_json(const json& doc) {
  synth::RecordsSpec spec;
  spec.n_patients = doc.at("n_patients").get<std::size_t>();
  spec.outcome_code = doc.value("outcome_code", spec.outcome_code);
  spec.common_lab_codes = doc.at("common_lab_codes").get<std::vector<std::string>>();
  if (doc.contains("rare_lab_codes")) {
    spec.rare_lab_codes = doc["rare_lab_codes"].get<std::vector<std::string>>();
  }
  spec.disease_effect = doc.value("disease_effect", spec.disease_effect);
  spec.case_fraction = doc.value("case_fraction", spec.case_fraction);
  spec.ambiguous_fraction = doc.value("ambiguous_fraction", spec.ambiguous_fraction);
  spec.visits_mean = doc.value("visits_mean", spec.visits_mean);
  spec.common_lab_rate = doc.value("common_lab_rate", spec.common_lab_rate);
  spec.rare_lab_rate = doc.value("rare_lab_rate", spec.rare_lab_rate);
  spec.history_days = doc.value("history_days", spec.history_days);
  spec.seed = doc.value("seed", std::uint64_t{0});
  return spec;
}

cohort::CohortSpec cohort_spec_from_json(const json& doc) {
  cohort::CohortSpec spec;
  spec.outcome_code = doc.at("outcome_code").get<std::string>();
  spec.min_code_count = doc.value("min_code_count", spec.min_code_count);
  spec.horizon_days = doc.value("horizon_days", spec.horizon_days);
  spec.common_missing_threshold =
      doc.value("common_missing_threshold", spec.common_missing_threshold);
  return spec;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid experiment config JSON: ") + e.what());
  }

  ExperimentConfig config;
  try {
    const auto& source = doc.at("source");
    const std::string type = source.at("type").get<std::string>();
    if (type == "csv") {
      config.data_csv = source.at("data").get<std::string>();
      config.meta_json = source.value("meta", std::string{});
    } else if (type == "tabular") {
      config.tabular = tabular_spec_from_json(source.at("spec"));
    } else if (type == "records") {
      RecordsSource rs;
      rs.records = records_spec_from_json(source.at("spec"));
      rs.cohort = cohort_spec_from_json(source.at("cohort"));
      if (source.contains("labs")) {
        cohort::LabConfig labs;
        labs.common = source["labs"].at("common").get<std::vector<std::string>>();
        labs.rare = source["labs"].at("rare").get<std::vector<std::string>>();
        rs.labs = std::move(labs);
      }
      config.records = std::move(rs);
      config.impute = ImputeChoice::SoftImpute;  // records always carry missing labs
    } else {
      throw ValidationError("unknown source type: " + type);
    }

    if (doc.contains("methods")) {
      config.methods.clear();
      for (const auto& item : doc["methods"]) {
        config.methods.push_back(method_from_string(item.get<std::string>()));
      }
    }
    if (doc.contains("horizons")) {
      config.horizons = doc["horizons"].get<std::vector<int>>();
    }
    config.n_trials = doc.value("n_trials", config.n_trials);
    config.test_fraction = doc.value("test_fraction", config.test_fraction);
    config.cv_folds = doc.value("cv_folds", config.cv_folds);
    config.permutation_repeats =
        doc.value("permutation_repeats", config.permutation_repeats);
    config.master_seed = doc.value("master_seed", std::uint64_t{0});
    config.threads = doc.value("threads", config.threads);

    if (doc.contains("impute")) {
      const std::string choice = doc["impute"].get<std::string>();
      if (choice == "none") {
        config.impute = ImputeChoice::None;
      } else if (choice == "mean") {
        config.impute = ImputeChoice::Mean;
      } else if (choice == "softimpute") {
        config.impute = ImputeChoice::SoftImpute;
      } else {
        throw ValidationError("unknown impute choice: " + choice);
      }
    }
    if (doc.contains("soft_impute")) {
      const auto& si = doc["soft_impute"];
      config.soft_impute.shrinkage_fraction =
          si.value("shrinkage_fraction", config.soft_impute.shrinkage_fraction);
      config.soft_impute.max_rank = si.value("max_rank", config.soft_impute.max_rank);
      config.soft_impute.tolerance = si.value("tol", config.soft_impute.tolerance);
      config.soft_impute.max_iterations =
          si.value("max_iter", config.soft_impute.max_iterations);
    }
    if (doc.contains("grids")) {
      const auto& grids = doc["grids"];
      if (grids.contains("lr")) {
        config.grids.lr.clear();
        for (const auto& item : grids["lr"]) {
          LrParams p;
          p.penalty.norm = linear::penalty_norm_from_string(item.at("norm").get<std::string>());
          p.penalty.lambda = item.at("lambda").get<double>();
          config.grids.lr.push_back(p);
        }
      }
      if (grids.contains("rf")) {
        config.grids.rf.clear();
        for (const auto& item : grids["rf"]) {
          RfParams p;
          p.n_trees = item.value("n_trees", p.n_trees);
          p.mtry_fraction = item.value("mtry_fraction", p.mtry_fraction);
          p.min_samples_leaf = item.value("min_samples_leaf", p.min_samples_leaf);
          config.grids.rf.push_back(p);
        }
      }
      if (grids.contains("gbm")) {
        config.grids.gbm.clear();
        for (const auto& item : grids["gbm"]) {
          GbmParams p;
          p.n_rounds = item.value("n_rounds", p.n_rounds);
          p.learning_rate = item.value("learning_rate", p.learning_rate);
          p.max_depth = item.value("max_depth", p.max_depth);
          p.reg_lambda = item.value("reg_lambda", p.reg_lambda);
          config.grids.gbm.push_back(p);
        }
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid experiment config: ") + e.what());
  }
  return config;
}

// --- report serialization ----------------------------------------------------

namespace {

ordered_json importance_to_json(const ImportanceReport& report) {
  ordered_json doc;
  doc["method"] = to_string(report.method);
  if (!report.model_kind.empty()) {
    doc["model"] = report.model_kind;
  }
  if (report.method == ImportanceMethod::Permutation) {
    doc["seed"] = report.seed;
    doc["repeats"] = report.repeats;
  }
  doc["scores"] = report.scores;
  return doc;
}

ImportanceReport importance_from_json(const json& doc,
                                      const std::vector<std::string>& feature_names) {
  ImportanceReport report;
  report.method = importance_method_from_string(doc.at("method").get<std::string>());
  report.model_kind = doc.value("model", std::string{});
  report.seed = doc.value("seed", std::uint64_t{0});
  report.repeats = doc.value("repeats", 0);
  report.scores = doc.at("scores").get<std::vector<double>>();
  report.feature_names = feature_names;
  return report;
}

ordered_json dendrogram_to_json(const interpret::Dendrogram& dendrogram) {
  ordered_json doc;
  doc["leaf_order"] = dendrogram.leaf_order;
  ordered_json merges = ordered_json::array();
  for (const auto& m : dendrogram.merges) {
    merges.push_back(ordered_json::array({m.a, m.b, m.height, m.size}));
  }
  doc["merges"] = std::move(merges);
  return doc;
}

interpret::Dendrogram dendrogram_from_json(const json& doc) {
  interpret::Dendrogram out;
  out.leaf_order = doc.at("leaf_order").get<std::vector<int>>();
  for (const auto& item : doc.at("merges")) {
    out.merges.push_back({item.at(0).get<int>(), item.at(1).get<int>(),
                          item.at(2).get<double>(), item.at(3).get<int>()});
  }
  return out;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
  ordered_json doc;
  doc["master_seed"] = report.master_seed;
  ordered_json methods = ordered_json::array();
  for (const Method m : report.methods) {
    methods.push_back(to_string(m));
  }
  doc["methods"] = std::move(methods);
  doc["feature_names"] = report.feature_names;

  ordered_json horizons = ordered_json::array();
  for (const auto& horizon : report.horizons) {
    ordered_json h;
    h["horizon_days"] = horizon.horizon_days;
    h["outcome"] = horizon.outcome;
    ordered_json trials = ordered_json::array();
    for (const auto& trial : horizon.trials) {
      ordered_json t;
      t["trial"] = trial.trial;
      ordered_json cells = ordered_json::array();
      for (std::size_t m = 0; m < trial.methods.size(); ++m) {
        const auto& cell = trial.methods[m];
        ordered_json c;
        c["method"] = to_string(report.methods[m]);
        c["auroc"] = cell.test_auroc;
        c["params"] = cell.params;
        c["internal_importance"] = importance_to_json(cell.internal_importance);
        c["permutation_importance"] = importance_to_json(cell.permutation_importance);
        cells.push_back(std::move(c));
      }
      t["methods"] = std::move(cells);
      t["univariate"] = importance_to_json(trial.univariate);
      trials.push_back(std::move(t));
    }
    h["trials"] = std::move(trials);
    horizons.push_back(std::move(h));
  }
  doc["horizons"] = std::move(horizons);

  ordered_json comparisons = ordered_json::array();
  for (const auto& cmp : report.comparisons) {
    ordered_json c;
    c["horizon_days"] = cmp.horizon_days;
    c["method_a"] = to_string(cmp.method_a);
    c["method_b"] = to_string(cmp.method_b);
    c["statistic"] = cmp.test.statistic;
    c["p_value"] = cmp.test.p_value;
    c["p_adjusted"] = cmp.test.p_adjusted.value_or(1.0);
    c["exact"] = cmp.test.exact;
    comparisons.push_back(std::move(c));
  }
  doc["comparisons"] = std::move(comparisons);

  ordered_json correlation;
  correlation["labels"] = report.correlation.labels;
  correlation["matrix"] = report.correlation.r;
  correlation["degenerate"] = report.correlation.degenerate;
  doc["correlation"] = std::move(correlation);

  ordered_json bicluster;
  bicluster["model"] = report.bicluster.model_kind;
  bicluster["outcomes"] = report.bicluster.outcomes;
  bicluster["features"] = report.bicluster.features;
  ordered_json values = ordered_json::array();
  for (std::size_t r = 0; r < report.bicluster.values.n_rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (std::size_t c = 0; c < report.bicluster.values.n_cols(); ++c) {
      row.push_back(report.bicluster.values.at(r, c));
    }
    values.push_back(std::move(row));
  }
  bicluster["values"] = std::move(values);
  bicluster["rows"] = dendrogram_to_json(report.bicluster.clustering.rows);
  bicluster["cols"] = dendrogram_to_json(report.bicluster.clustering.cols);
  doc["bicluster"] = std::move(bicluster);

  return doc.dump(2) + "\n";
}

ExperimentReport report_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid report JSON: ") + e.what());
  }

  ExperimentReport report;
  try {
    report.master_seed = doc.at("master_seed").get<std::uint64_t>();
    for (const auto& item : doc.at("methods")) {
      report.methods.push_back(method_from_string(item.get<std::string>()));
    }
    report.feature_names = doc.at("feature_names").get<std::vector<std::string>>();

    for (const auto& h : doc.at("horizons")) {
      HorizonResult horizon;
      horizon.horizon_days = h.at("horizon_days").get<int>();
      horizon.outcome = h.at("outcome").get<std::string>();
      for (const auto& t : h.at("trials")) {
        TrialResult trial;
        trial.trial = t.at("trial").get<int>();
        for (const auto& c : t.at("methods")) {
          TrialMethodResult cell;
          cell.test_auroc = c.at("auroc").get<double>();
          for (const auto& [key, value] : c.at("params").items()) {
            cell.params[key] = value.get<std::string>();
          }
          cell.internal_importance =
              importance_from_json(c.at("internal_importance"), report.feature_names);
          cell.permutation_importance =
              importance_from_json(c.at("permutation_importance"), report.feature_names);
          trial.methods.push_back(std::move(cell));
        }
        trial.univariate = importance_from_json(t.at("univariate"), report.feature_names);
        horizon.trials.push_back(std::move(trial));
      }
      report.horizons.push_back(std::move(horizon));
    }

    for (const auto& c : doc.at("comparisons")) {
      MethodComparison cmp;
      cmp.horizon_days = c.at("horizon_days").get<int>();
      cmp.method_a = method_from_string(c.at("method_a").get<std::string>());
      cmp.method_b = method_from_string(c.at("method_b").get<std::string>());
      cmp.test.statistic = c.at("statistic").get<double>();
      cmp.test.p_value = c.at("p_value").get<double>();
      cmp.test.p_adjusted = c.at("p_adjusted").get<double>();
      cmp.test.exact = c.at("exact").get<bool>();
      report.comparisons.push_back(std::move(cmp));
    }

    const auto& correlation = doc.at("correlation");
    report.correlation.labels = correlation.at("labels").get<std::vector<std::string>>();
    report.correlation.r = correlation.at("matrix").get<std::vector<std::vector<double>>>();
    report.correlation.degenerate = correlation.at("degenerate").get<std::vector<bool>>();

    const auto& bicluster = doc.at("bicluster");
    report.bicluster.model_kind = bicluster.at("model").get<std::string>();
    report.bicluster.outcomes = bicluster.at("outcomes").get<std::vector<std::string>>();
    report.bicluster.features = bicluster.at("features").get<std::vector<std::string>>();
    const auto values = bicluster.at("values").get<std::vector<std::vector<double>>>();
    report.bicluster.values =
        FeatureMatrix(values.size(), values.empty() ? 0 : values.front().size());
    for (std::size_t r = 0; r < values.size(); ++r) {
      for (std::size_t c = 0; c < values[r].size(); ++c) {
        report.bicluster.values.at(r, c) = values[r][c];
      }
    }
    report.bicluster.clustering.rows = dendrogram_from_json(bicluster.at("rows"));
    report.bicluster.clustering.cols = dendrogram_from_json(bicluster.at("cols"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid report: ") + e.what());
  }
  return report;
}

void write_report_files(const ExperimentReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  {
    std::ofstream out(path("report.json"), std::ios::binary);
    if (!out) {
      throw IoError("cannot write " + path("report.json"));
    }
    out << report_to_json(report);
  }

  {
    std::ofstream out(path("aurocs.csv"));
    if (!out) {
      throw IoError("cannot write " + path("aurocs.csv"));
    }
    out << "horizon_days,outcome,method,trial,auroc\n";
    for (const auto& horizon : report.horizons) {
      for (const auto& trial : horizon.trials) {
        for (std::size_t m = 0; m < trial.methods.size(); ++m) {
          out << horizon.horizon_days << ',' << horizon.outcome << ','
              << to_string(report.methods[m]) << ',' << trial.trial << ','
              << format_double(trial.methods[m].test_auroc) << '\n';
        }
      }
    }
  }

  {
    std::ofstream out(path("importances.csv"));
    if (!out) {
      throw IoError("cannot write " + path("importances.csv"));
    }
    out << "horizon_days,outcome,model,measure,trial,feature,score\n";
    const auto emit = [&](const HorizonResult& horizon, int trial,
                          const ImportanceReport& rep) {
      for (std::size_t j = 0; j < rep.scores.size(); ++j) {
        out << horizon.horizon_days << ',' << horizon.outcome << ',' << rep.model_kind << ','
            << to_string(rep.method) << ',' << trial << ',' << report.feature_names[j] << ','
            << format_double(rep.scores[j]) << '\n';
      }
    };
    for (const auto& horizon : report.horizons) {
      for (const auto& trial : horizon.trials) {
        for (const auto& cell : trial.methods) {
          emit(horizon, trial.trial, cell.internal_importance);
          emit(horizon, trial.trial, cell.permutation_importance);
        }
        emit(horizon, trial.trial, trial.univariate);
      }
    }
  }

  {
    std::ofstream out(path("correlations.csv"));
    if (!out) {
      throw IoError("cannot write " + path("correlations.csv"));
    }
    out << "measure_a,measure_b,r\n";
    for (std::size_t a = 0; a < report.correlation.labels.size(); ++a) {
      for (std::size_t b = 0; b < report.correlation.labels.size(); ++b) {
        out << report.correlation.labels[a] << ',' << report.correlation.labels[b] << ','
            << format_double(report.correlation.r[a][b]) << '\n';
      }
    }
  }
}

}  // namespace featimp::experiment
