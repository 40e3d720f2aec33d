#include "featimp/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "featimp/io.hpp"

namespace featimp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json linear_to_json(const linear::LinearModel& model) {
  ordered_json doc;
  doc["penalty"] = linear::to_string(model.penalty.norm);
  doc["lambda"] = model.penalty.lambda;
  doc["beta"] = model.beta;
  doc["converged"] = model.converged;
  doc["n_iterations"] = model.n_iterations;
  return doc;
}

linear::LinearModel linear_from_json(const json& doc) {
  linear::LinearModel model;
  model.penalty.norm = linear::penalty_norm_from_string(doc.at("penalty").get<std::string>());
  model.penalty.lambda = doc.at("lambda").get<double>();
  model.beta = doc.at("beta").get<std::vector<double>>();
  model.converged = doc.at("converged").get<bool>();
  model.n_iterations = doc.value("n_iterations", 0);
  return model;
}

ordered_json tree_to_json(const trees::Tree& tree) {
  ordered_json nodes = ordered_json::array();
  for (const auto& node : tree.nodes) {
    ordered_json n;
    n["feature"] = node.feature;
    n["threshold"] = node.threshold;
    n["gain"] = node.gain;
    n["n"] = node.n_samples;
    n["left"] = node.left;
    n["right"] = node.right;
    n["leaf_value"] = node.leaf_value;
    nodes.push_back(std::move(n));
  }
  return nodes;
}

trees::Tree tree_from_json(const json& doc) {
  trees::Tree tree;
  for (const auto& n : doc) {
    trees::TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.gain = n.at("gain").get<double>();
    node.n_samples = n.at("n").get<int>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.leaf_value = n.at("leaf_value").get<double>();
    tree.nodes.push_back(node);
  }
  if (tree.nodes.empty()) {
    throw ValidationError("model tree has no nodes");
  }
  return tree;
}

ordered_json ensemble_to_json(const trees::EnsembleModel& model) {
  ordered_json doc;
  doc["kind"] = model.kind == trees::EnsembleKind::Forest ? "forest" : "boosted";
  doc["n_features"] = model.n_features;
  doc["base_score"] = model.base_score;
  if (model.kind == trees::EnsembleKind::Forest) {
    const auto& config = std::get<trees::ForestConfig>(model.config);
    doc["config"] = {{"n_trees", config.n_trees},
                     {"max_depth", config.max_depth},
                     {"min_samples_leaf", config.min_samples_leaf},
                     {"mtry", config.mtry},
                     {"bootstrap", config.bootstrap},
                     {"seed", config.seed}};
  } else {
    const auto& config = std::get<trees::BoostConfig>(model.config);
    doc["config"] = {{"n_rounds", config.n_rounds},
                     {"learning_rate", config.learning_rate},
                     {"max_depth", config.max_depth},
                     {"reg_lambda", config.reg_lambda},
                     {"min_child_weight", config.min_child_weight},
                     {"seed", config.seed}};
  }
  ordered_json trees_json = ordered_json::array();
  for (const auto& tree : model.trees) {
    trees_json.push_back(tree_to_json(tree));
  }
  doc["trees"] = std::move(trees_json);
  return doc;
}

trees::EnsembleModel ensemble_from_json(const json& doc) {
  trees::EnsembleModel model;
  const std::string kind = doc.at("kind").get<std::string>();
  model.kind = kind == "forest" ? trees::EnsembleKind::Forest : trees::EnsembleKind::Boosted;
  model.n_features = doc.at("n_features").get<std::size_t>();
  model.base_score = doc.at("base_score").get<double>();
  const auto& config = doc.at("config");
  if (model.kind == trees::EnsembleKind::Forest) {
    trees::ForestConfig fc;
    fc.n_trees = config.at("n_trees").get<int>();
    fc.max_depth = config.at("max_depth").get<int>();
    fc.min_samples_leaf = config.at("min_samples_leaf").get<int>();
    fc.mtry = config.at("mtry").get<int>();
    fc.bootstrap = config.at("bootstrap").get<bool>();
    fc.seed = config.at("seed").get<std::uint64_t>();
    model.config = fc;
  } else {
    trees::BoostConfig bc;
    bc.n_rounds = config.at("n_rounds").get<int>();
    bc.learning_rate = config.at("learning_rate").get<double>();
    bc.max_depth = config.at("max_depth").get<int>();
    bc.reg_lambda = config.at("reg_lambda").get<double>();
    bc.min_child_weight = config.at("min_child_weight").get<double>();
    bc.seed = config.at("seed").get<std::uint64_t>();
    model.config = bc;
  }
  for (const auto& tree : doc.at("trees")) {
    model.trees.push_back(tree_from_json(tree));
  }
  return model;
}

}  // namespace

void save_model(const std::string& path, const SavedModel& model) {
  ordered_json doc;
  doc["kind"] = model.predictor.kind();
  if (const auto* lm = model.predictor.linear_model()) {
    doc["model"] = linear_to_json(*lm);
  } else {
    doc["model"] = ensemble_to_json(*model.predictor.ensemble_model());
  }
  if (model.standardization) {
    doc["standardization"] = {{"means", model.standardization->means},
                              {"stds", model.standardization->stds},
                              {"constant_flags", model.standardization->constant_flags}};
  }
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid model JSON: ") + e.what());
  }
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    std::optional<StandardizationStats> stats;
    if (doc.contains("standardization")) {
      StandardizationStats s;
      s.means = doc["standardization"].at("means").get<std::vector<double>>();
      s.stds = doc["standardization"].at("stds").get<std::vector<double>>();
      s.constant_flags = doc["standardization"].at("constant_flags").get<std::vector<bool>>();
      stats = std::move(s);
    }
    if (kind == "lr") {
      return {interpret::Predictor(linear_from_json(doc.at("model"))), std::move(stats)};
    }
    if (kind == "rf" || kind == "gbm") {
      return {interpret::Predictor(ensemble_from_json(doc.at("model"))), std::move(stats)};
    }
    throw ValidationError("unknown model kind: " + kind);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
}

void save_importance_csv(const std::string& path, const ImportanceReport& report) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out << "feature,score,method,model,seed\n";
  for (std::size_t j = 0; j < report.scores.size(); ++j) {
    out << report.feature_names[j] << ',' << format_double(report.scores[j]) << ','
        << to_string(report.method) << ',' << report.model_kind << ',' << report.seed
        << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

void save_importance_json(const std::string& path, const ImportanceReport& report) {
  ordered_json doc;
  doc["method"] = to_string(report.method);
  doc["model"] = report.model_kind;
  doc["seed"] = report.seed;
  doc["repeats"] = report.repeats;
  doc["features"] = report.feature_names;
  doc["scores"] = report.scores;
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out << doc.dump(2) << '\n';
}

}  // namespace featimp
