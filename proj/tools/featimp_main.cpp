// featimp command-line front end: synthetic data generation, cohort
// construction, imputation, model training, feature importance, and the full
// experiment protocol. Every subcommand is a pure function of its input
// files, flags, and seed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "featimp/cohort.hpp"
#include "featimp/errors.hpp"
#include "featimp/experiment.hpp"
#include "featimp/impute.hpp"
#include "featimp/interpret.hpp"
#include "featimp/io.hpp"
#include "featimp/linear.hpp"
#include "featimp/model_io.hpp"
#include "featimp/preprocess.hpp"
#include "featimp/svg.hpp"
#include "featimp/synth.hpp"
#include "featimp/trees.hpp"

namespace {

namespace fs = std::filesystem;
using featimp::FeatureMatrix;
using featimp::LabeledDataset;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

/// FEATIMP_OUT_DIR overrides --out-dir; nothing else honors the environment.
std::string resolve_out_dir(const std::string& flag_value) {
  if (const char* env = std::getenv("FEATIMP_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return flag_value;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw featimp::IoError("cannot open " + path);
  }
  try {
    nlohmann::json doc;
    in >> doc;
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw featimp::ParseError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw featimp::IoError("cannot write " + path);
  }
  out << content;
  if (!out) {
    throw featimp::IoError("write failed: " + path);
  }
}

LabeledDataset load_data(const std::string& data_path, const std::string& meta_path) {
  if (meta_path.empty()) {
    return featimp::load_dataset(data_path);
  }
  const auto meta = featimp::load_feature_meta(meta_path);
  return featimp::load_dataset(data_path, &meta);
}

struct GenerateOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

int run_generate(const GenerateOptions& opt) {
  const auto doc = load_json_file(opt.config_path);
  const std::string type = doc.value("type", std::string{"tabular"});
  fs::create_directories(opt.out_dir);

  if (type == "tabular") {
    // Reuse the experiment config parser by wrapping the spec.
    nlohmann::json wrapper{{"source", {{"type", "tabular"}, {"spec", doc.at("spec")}}}};
    const std::string tmp = (fs::path(opt.out_dir) / ".generate_config.json").string();
    write_text_file(tmp, wrapper.dump());
    auto config = featimp::experiment::load_experiment_config(tmp);
    fs::remove(tmp);
    auto spec = *config.tabular;
    if (opt.seed) {
      spec.seed = *opt.seed;
    }
    const LabeledDataset data = featimp::synth::generate_tabular(spec);
    featimp::save_dataset((fs::path(opt.out_dir) / "data.csv").string(), data);
    featimp::save_feature_meta((fs::path(opt.out_dir) / "meta.json").string(), data.meta);
    std::cout << "wrote " << data.n_rows() << " rows x " << data.n_cols() << " features to "
              << opt.out_dir << "\n";
    return kExitOk;
  }
  if (type == "records") {
    nlohmann::json wrapper{{"source",
                            {{"type", "records"},
                             {"spec", doc.at("spec")},
                             {"cohort",
                              {{"outcome_code", doc.at("spec").value("outcome_code", "250.00")}}}}}};
    const std::string tmp = (fs::path(opt.out_dir) / ".generate_config.json").string();
    write_text_file(tmp, wrapper.dump());
    auto config = featimp::experiment::load_experiment_config(tmp);
    fs::remove(tmp);
    auto spec = config.records->records;
    if (opt.seed) {
      spec.seed = *opt.seed;
    }
    const auto records = featimp::synth::generate_records(spec);
    featimp::cohort::save_patient_records((fs::path(opt.out_dir) / "records.jsonl").string(),
                                          records);
    std::cout << "wrote " << records.size() << " patient records to " << opt.out_dir << "\n";
    return kExitOk;
  }
  throw featimp::ValidationError("generate: unknown config type '" + type + "'");
}

struct CohortOptions {
  std::string records_path;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<int> horizon_days;
  std::uint64_t seed = 0;
};

int run_cohort(const CohortOptions& opt) {
  const auto doc = load_json_file(opt.config_path);
  featimp::cohort::CohortSpec spec;
  spec.outcome_code = doc.at("outcome_code").get<std::string>();
  spec.min_code_count = doc.value("min_code_count", spec.min_code_count);
  spec.horizon_days = doc.value("horizon_days", spec.horizon_days);
  spec.common_missing_threshold =
      doc.value("common_missing_threshold", spec.common_missing_threshold);
  if (opt.horizon_days) {
    spec.horizon_days = *opt.horizon_days;
  }

  const auto records = featimp::cohort::load_patient_records(opt.records_path);
  const featimp::cohort::RecordIndex index(records);
  const auto classified = featimp::cohort::classify_patients(records, spec);
  const auto matched = featimp::cohort::match_controls(
      classified.cases, classified.control_pool, index, opt.seed);
  if (matched.unmatched_cases > 0) {
    std::cerr << "warning: dropped " << matched.unmatched_cases
              << " cases with no eligible control\n";
  }
  std::vector<featimp::cohort::CohortMember> members = matched.cases;
  members.insert(members.end(), matched.controls.begin(), matched.controls.end());
  if (members.empty()) {
    throw featimp::ValidationError("cohort: no matched cases");
  }

  featimp::cohort::LabConfig labs;
  if (doc.contains("labs")) {
    if (doc["labs"].is_string() && doc["labs"].get<std::string>() == "default") {
      labs = featimp::cohort::default_lab_config();
    } else {
      labs.common = doc["labs"].at("common").get<std::vector<std::string>>();
      labs.rare = doc["labs"].at("rare").get<std::vector<std::string>>();
    }
  } else {
    const auto rates = featimp::cohort::lab_missing_rates(members, index);
    labs = featimp::cohort::split_common_rare(rates, spec.common_missing_threshold);
  }

  auto extracted = featimp::cohort::extract_features(members, index, spec, labs);
  if (extracted.unknown_lab_codes > 0) {
    std::cerr << "note: ignored " << extracted.unknown_lab_codes
              << " lab events with codes outside the panel\n";
  }
  LabeledDataset data{std::move(extracted.x), std::move(extracted.labels),
                      std::move(extracted.meta)};

  fs::create_directories(opt.out_dir);
  const std::string stem = "cohort_h" + std::to_string(spec.horizon_days);
  featimp::save_dataset((fs::path(opt.out_dir) / (stem + ".csv")).string(), data);
  featimp::save_feature_meta((fs::path(opt.out_dir) / (stem + "_meta.json")).string(),
                             data.meta);
  std::cout << "cohort: " << matched.cases.size() << " cases + " << matched.controls.size()
            << " controls, " << data.n_cols() << " features -> " << opt.out_dir << "/" << stem
            << ".csv\n";
  return kExitOk;
}

struct ImputeOptions {
  std::string data_path;
  std::string meta_path;
  std::string out_path;
  std::string method = "softimpute";
  std::string config_path;
  double shrinkage_fraction = 0.1;
  int max_rank = 20;
  double tol = 1e-5;
  int max_iter = 200;
};

int run_impute(ImputeOptions opt) {
  if (!opt.config_path.empty()) {
    const auto doc = load_json_file(opt.config_path);
    opt.shrinkage_fraction = doc.value("shrinkage_fraction", opt.shrinkage_fraction);
    opt.max_rank = doc.value("max_rank", opt.max_rank);
    opt.tol = doc.value("tol", opt.tol);
    opt.max_iter = doc.value("max_iter", opt.max_iter);
  }
  LabeledDataset data = load_data(opt.data_path, opt.meta_path);

  if (opt.method == "mean") {
    data.x = featimp::impute::mean_impute(data.x);
  } else if (opt.method == "softimpute") {
    featimp::impute::SoftImputeConfig config;
    config.shrinkage =
        opt.shrinkage_fraction * featimp::impute::initial_singular_scale(data.x);
    config.max_rank = std::min<int>(
        opt.max_rank, static_cast<int>(std::min(data.n_rows(), data.n_cols())));
    config.tolerance = opt.tol;
    config.max_iterations = opt.max_iter;
    auto result = featimp::impute::soft_impute(data.x, config);
    if (!result.converged) {
      std::cerr << "warning: softImpute did not converge within " << opt.max_iter
                << " iterations\n";
    }
    std::cout << "softImpute: " << result.n_iterations << " iterations, rank "
              << result.rank << "\n";
    data.x = std::move(result.completed);
  } else {
    throw featimp::ValidationError("impute: unknown method '" + opt.method + "'");
  }
  featimp::save_dataset(opt.out_path, data);
  return kExitOk;
}

struct TrainOptions {
  std::string data_path;
  std::string meta_path;
  std::string method;
  std::string out_path = "model.json";
  std::uint64_t seed = 0;
  int threads = 1;
  // lr
  std::string norm = "l2";
  double lambda = 0.01;
  // rf
  int n_trees = 500;
  int mtry = 0;
  int max_depth = -1;
  int min_samples_leaf = 1;
  // gbm
  int n_rounds = 100;
  double learning_rate = 0.1;
  int gbm_max_depth = 3;
  double reg_lambda = 1.0;
};

int run_train(const TrainOptions& opt) {
  LabeledDataset data = load_data(opt.data_path, opt.meta_path);
  data.require_complete("train");

  featimp::SavedModel saved = [&]() -> featimp::SavedModel {
    if (opt.method == "lr") {
      auto [std_x, stats] = featimp::standardize(data.x);
      LabeledDataset std_data{std::move(std_x), data.y, data.meta};
      featimp::linear::PenaltyConfig penalty{
          featimp::linear::penalty_norm_from_string(opt.norm), opt.lambda};
      auto model = featimp::linear::fit_logistic(std_data, penalty);
      if (!model.converged) {
        std::cerr << "warning: solver did not reach the convergence tolerance\n";
      }
      return {featimp::interpret::Predictor(std::move(model)), std::move(stats)};
    }
    if (opt.method == "rf") {
      featimp::trees::ForestConfig config;
      config.n_trees = opt.n_trees;
      config.mtry = opt.mtry;
      config.max_depth = opt.max_depth;
      config.min_samples_leaf = opt.min_samples_leaf;
      config.seed = opt.seed;
      return {featimp::interpret::Predictor(
                  featimp::trees::fit_random_forest(data, config, opt.threads)),
              std::nullopt};
    }
    if (opt.method == "gbm") {
      featimp::trees::BoostConfig config;
      config.n_rounds = opt.n_rounds;
      config.learning_rate = opt.learning_rate;
      config.max_depth = opt.gbm_max_depth;
      config.reg_lambda = opt.reg_lambda;
      config.seed = opt.seed;
      return {featimp::interpret::Predictor(featimp::trees::fit_gradient_boosting(data, config)),
              std::nullopt};
    }
    throw featimp::ValidationError("train: unknown method '" + opt.method + "'");
  }();

  featimp::save_model(opt.out_path, saved);

  const FeatureMatrix eval_x =
      saved.standardization ? featimp::standardize(data.x, *saved.standardization).first
                            : data.x;
  const auto probs = saved.predictor.predict_proba(eval_x);
  std::cout << "trained " << opt.method << " on " << data.n_rows() << " rows; training AUROC "
            << featimp::format_double(featimp::stats::auroc(probs, data.y).auroc) << " -> "
            << opt.out_path << "\n";
  return kExitOk;
}

struct ImportanceOptions {
  std::string data_path;
  std::string meta_path;
  std::string model_path;
  std::string measure;
  std::string out_path = "importance.csv";
  std::uint64_t seed = 0;
  int repeats = 1;
  int threads = 1;
};

int run_importance(const ImportanceOptions& opt) {
  LabeledDataset data = load_data(opt.data_path, opt.meta_path);
  data.require_complete("importance");

  featimp::ImportanceReport report;
  if (opt.measure == "univariate") {
    auto [std_x, stats] = featimp::standardize(data.x);
    LabeledDataset std_data{std::move(std_x), data.y, data.meta};
    report = featimp::linear::univariate_screen(std_data);
  } else {
    if (opt.model_path.empty()) {
      throw featimp::ValidationError("importance: --model is required for measure '" +
                                     opt.measure + "'");
    }
    featimp::SavedModel saved = featimp::load_model(opt.model_path);
    if (opt.measure == "coefficient") {
      const auto* lm = saved.predictor.linear_model();
      if (lm == nullptr) {
        throw featimp::ValidationError("importance: coefficient measure needs an lr model");
      }
      report = featimp::linear::coefficient_importance(*lm, data.meta);
    } else if (opt.measure == "gini") {
      const auto* em = saved.predictor.ensemble_model();
      if (em == nullptr) {
        throw featimp::ValidationError("importance: gini measure needs an rf or gbm model");
      }
      report = featimp::trees::gini_importance(*em, data.meta);
    } else if (opt.measure == "permutation") {
      LabeledDataset view = data;
      if (saved.standardization) {
        view.x = featimp::standardize(data.x, *saved.standardization).first;
      }
      report = featimp::interpret::permutation_importance(saved.predictor, view, opt.seed,
                                                          opt.repeats, opt.threads);
    } else {
      throw featimp::ValidationError("importance: unknown measure '" + opt.measure + "'");
    }
  }

  featimp::save_importance_csv(opt.out_path, report);
  const std::string json_path =
      fs::path(opt.out_path).replace_extension(".json").string();
  featimp::save_importance_json(json_path, report);
  std::cout << "wrote " << report.scores.size() << " scores to " << opt.out_path << " and "
            << json_path << "\n";
  return kExitOk;
}

struct ExperimentOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int run_experiment_cmd(const ExperimentOptions& opt) {
  auto config = featimp::experiment::load_experiment_config(opt.config_path);
  if (opt.seed) {
    config.master_seed = *opt.seed;
  }
  if (opt.threads) {
    config.threads = *opt.threads;
  }
  const auto report = featimp::experiment::run_experiment(config);
  featimp::experiment::write_report_files(report, opt.out_dir);
  std::cout << "experiment complete: " << report.horizons.size() << " horizon(s) x "
            << config.n_trials << " trials x " << config.methods.size() << " methods -> "
            << opt.out_dir << "/report.json\n";
  return kExitOk;
}

struct ReportOptions {
  std::string report_path;
  std::string out_dir = ".";
  bool heatmap = false;
  int top_k = 0;  // 0: keep the report's stored selection
};

int run_report(const ReportOptions& opt) {
  const auto report = featimp::experiment::report_from_json_file(opt.report_path);
  featimp::experiment::write_report_files(report, opt.out_dir);
  if (opt.heatmap) {
    auto section = report.bicluster;
    if (opt.top_k > 0 && static_cast<std::size_t>(opt.top_k) < section.features.size()) {
      const auto k = static_cast<std::size_t>(opt.top_k);
      FeatureMatrix trimmed(section.values.n_rows(), k);
      for (std::size_t r = 0; r < trimmed.n_rows(); ++r) {
        for (std::size_t c = 0; c < k; ++c) {
          trimmed.at(r, c) = section.values.at(r, c);
        }
      }
      section.values = std::move(trimmed);
      section.features.resize(k);
      section.clustering = featimp::interpret::bicluster(section.values);
    }
    const std::string svg = featimp::render_heatmap_svg(
        section.values, section.outcomes, section.features, section.clustering);
    const std::string path = (fs::path(opt.out_dir) / "heatmap.svg").string();
    write_text_file(path, svg);
    std::cout << "wrote " << path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"featimp: predictive modeling and feature-importance comparison toolkit"};
  app.require_subcommand(1);

  GenerateOptions generate_opt;
  auto* generate = app.add_subcommand("generate", "Generate synthetic datasets or records");
  generate->add_option("--config", generate_opt.config_path, "Generator spec JSON")
      ->required();
  generate->add_option("--out-dir", generate_opt.out_dir, "Output directory");
  generate->add_option("--seed", generate_opt.seed, "Override the spec seed");

  CohortOptions cohort_opt;
  auto* cohort = app.add_subcommand("cohort", "Build a case/control modeling dataset");
  cohort->add_option("--records", cohort_opt.records_path, "Patient records JSONL")
      ->required();
  cohort->add_option("--config", cohort_opt.config_path, "Cohort spec JSON")->required();
  cohort->add_option("--out-dir", cohort_opt.out_dir, "Output directory");
  cohort->add_option("--horizon-days", cohort_opt.horizon_days, "Override the horizon");
  cohort->add_option("--seed", cohort_opt.seed, "Control-matching seed");

  ImputeOptions impute_opt;
  auto* impute = app.add_subcommand("impute", "Fill missing cells in a dataset CSV");
  impute->add_option("--data", impute_opt.data_path, "Input CSV")->required();
  impute->add_option("--meta", impute_opt.meta_path, "Feature metadata JSON");
  impute->add_option("--out", impute_opt.out_path, "Output CSV")->required();
  impute->add_option("--method", impute_opt.method, "softimpute or mean");
  impute->add_option("--config", impute_opt.config_path, "Config JSON");
  impute->add_option("--shrinkage-fraction,--shrinkage_fraction",
                     impute_opt.shrinkage_fraction,
                     "Threshold as a fraction of the initial top singular value");
  impute->add_option("--max-rank,--max_rank", impute_opt.max_rank, "Rank cap");
  impute->add_option("--tol", impute_opt.tol, "Relative Frobenius tolerance");
  impute->add_option("--max-iter,--max_iter", impute_opt.max_iter, "Iteration cap");

  TrainOptions train_opt;
  auto* train = app.add_subcommand("train", "Fit a model and save it as JSON");
  train->add_option("--data", train_opt.data_path, "Training CSV")->required();
  train->add_option("--meta", train_opt.meta_path, "Feature metadata JSON");
  train->add_option("--method", train_opt.method, "lr, rf, or gbm")
      ->required()
      ->check(CLI::IsMember({"lr", "rf", "gbm"}));
  train->add_option("--out", train_opt.out_path, "Model output path");
  train->add_option("--seed", train_opt.seed, "Model seed");
  train->add_option("--threads", train_opt.threads, "Worker cap");
  train->add_option("--norm", train_opt.norm, "lr: l1 or l2");
  train->add_option("--lambda", train_opt.lambda, "lr: penalty strength");
  train->add_option("--n-trees", train_opt.n_trees, "rf: tree count");
  train->add_option("--mtry", train_opt.mtry, "rf: features per split (0 = sqrt)");
  train->add_option("--max-depth", train_opt.max_depth, "rf: depth cap (-1 = none)");
  train->add_option("--min-samples-leaf", train_opt.min_samples_leaf, "rf: leaf size");
  train->add_option("--n-rounds", train_opt.n_rounds, "gbm: boosting rounds");
  train->add_option("--learning-rate", train_opt.learning_rate, "gbm: shrinkage per round");
  train->add_option("--gbm-max-depth", train_opt.gbm_max_depth, "gbm: tree depth");
  train->add_option("--reg-lambda", train_opt.reg_lambda, "gbm: leaf L2 penalty");

  ImportanceOptions importance_opt;
  auto* importance = app.add_subcommand("importance", "Score feature importance");
  importance->add_option("--data", importance_opt.data_path, "Evaluation CSV")->required();
  importance->add_option("--meta", importance_opt.meta_path, "Feature metadata JSON");
  importance->add_option("--model", importance_opt.model_path, "Trained model JSON");
  importance->add_option("--measure", importance_opt.measure, "Importance measure")
      ->required()
      ->check(CLI::IsMember({"coefficient", "univariate", "gini", "permutation"}));
  importance->add_option("--out", importance_opt.out_path, "Output CSV path");
  importance->add_option("--seed", importance_opt.seed, "Permutation seed");
  importance->add_option("--repeats", importance_opt.repeats, "Permutation repeats");
  importance->add_option("--threads", importance_opt.threads, "Worker cap");

  ExperimentOptions experiment_opt;
  auto* experiment = app.add_subcommand("experiment", "Run the full comparison protocol");
  experiment->add_option("--config", experiment_opt.config_path, "Experiment config JSON")
      ->required();
  experiment->add_option("--out-dir", experiment_opt.out_dir, "Output directory");
  experiment->add_option("--seed", experiment_opt.seed, "Override master_seed");
  experiment->add_option("--threads", experiment_opt.threads, "Worker cap");

  ReportOptions report_opt;
  auto* report = app.add_subcommand("report", "Re-emit CSV/SVG projections of a report");
  report->add_option("--report", report_opt.report_path, "report.json path")->required();
  report->add_option("--out-dir", report_opt.out_dir, "Output directory");
  report->add_flag("--heatmap", report_opt.heatmap, "Emit the bicluster heatmap SVG");
  report->add_option("--top-k", report_opt.top_k, "Trim the heatmap to the top K features");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints usage, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (generate->parsed()) {
      generate_opt.out_dir = resolve_out_dir(generate_opt.out_dir);
      return run_generate(generate_opt);
    }
    if (cohort->parsed()) {
      cohort_opt.out_dir = resolve_out_dir(cohort_opt.out_dir);
      return run_cohort(cohort_opt);
    }
    if (impute->parsed()) {
      return run_impute(impute_opt);
    }
    if (train->parsed()) {
      return run_train(train_opt);
    }
    if (importance->parsed()) {
      return run_importance(importance_opt);
    }
    if (experiment->parsed()) {
      experiment_opt.out_dir = resolve_out_dir(experiment_opt.out_dir);
      return run_experiment_cmd(experiment_opt);
    }
    if (report->parsed()) {
      report_opt.out_dir = resolve_out_dir(report_opt.out_dir);
      return run_report(report_opt);
    }
  } catch (const featimp::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const featimp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
