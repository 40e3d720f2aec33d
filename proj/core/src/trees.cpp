#include "featimp/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "featimp/parallel.hpp"

namespace featimp::trees {

namespace {

double gini_impurity(double n_pos, double n_total) {
  const double p = n_pos / n_total;
  return 2.0 * p * (1.0 - p);
}

/// Draws k distinct feature indices (ascending) via partial Fisher-Yates.
/// Ascending order makes the candidate scan break ties toward the lowest
/// feature index.
std::vector<int> sample_features(std::size_t d, int k, rng::Rng& rng) {
  std::vector<int> pool(d);
  std::iota(pool.begin(), pool.end(), 0);
  if (static_cast<std::size_t>(k) >= d) {
    return pool;
  }
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(rng.uniform_int(d - static_cast<std::size_t>(i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

struct GiniSplit {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double decrease = -1.0;
};

GiniSplit best_gini_split(const LabeledDataset& data, const std::vector<std::size_t>& rows,
                          const std::vector<int>& features, int min_samples_leaf) {
  const auto n = static_cast<double>(rows.size());
  double n_pos = 0.0;
  for (std::size_t r : rows) {
    n_pos += data.y[r];
  }
  const double parent = gini_impurity(n_pos, n);

  GiniSplit best;
  std::vector<std::pair<double, int>> sorted(rows.size());
  for (int f : features) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      sorted[k] = {data.x.at(rows[k], static_cast<std::size_t>(f)), data.y[rows[k]]};
    }
    std::sort(sorted.begin(), sorted.end());

    double left_pos = 0.0;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      left_pos += sorted[k].second;
      if (sorted[k].first == sorted[k + 1].first) {
        continue;  // not a boundary between distinct values
      }
      const double left_n = static_cast<double>(k + 1);
      const double right_n = n - left_n;
      if (left_n < min_samples_leaf || right_n < min_samples_leaf) {
        continue;
      }
      // Zero-decrease splits are taken (growth stops on purity and size
      // limits only); ties keep the lowest feature index, lowest threshold.
      const double decrease = parent - (left_n / n) * gini_impurity(left_pos, left_n) -
                              (right_n / n) * gini_impurity(n_pos - left_pos, right_n);
      if (decrease > best.decrease) {
        // When the midpoint rounds up to the right value, fall back to the
        // left value so the <= partition matches the counted split.
        double threshold = sorted[k].first + 0.5 * (sorted[k + 1].first - sorted[k].first);
        if (threshold >= sorted[k + 1].first) {
          threshold = sorted[k].first;
        }
        best.found = true;
        best.feature = f;
        best.threshold = threshold;
        best.decrease = std::max(decrease, 0.0);
      }
    }
  }
  return best;
}

void grow_gini_tree(const LabeledDataset& data, const GrowthLimits& limits, int mtry,
                    rng::Rng& rng, Tree& tree, std::vector<std::size_t> rows, int depth,
                    int node_index) {
  const auto n = static_cast<double>(rows.size());
  double n_pos = 0.0;
  for (std::size_t r : rows) {
    n_pos += data.y[r];
  }
  TreeNode& placeholder = tree.nodes[static_cast<std::size_t>(node_index)];
  placeholder.n_samples = static_cast<int>(rows.size());

  const bool pure = n_pos == 0.0 || n_pos == n;
  const bool depth_capped = limits.max_depth >= 0 && depth >= limits.max_depth;
  if (pure || depth_capped || rows.size() < 2 * static_cast<std::size_t>(limits.min_samples_leaf) ||
      rows.size() < 2) {
    placeholder.leaf_value = n_pos / n;
    return;
  }

  const std::vector<int> features =
      sample_features(data.n_cols(), mtry, rng);
  const GiniSplit split = best_gini_split(data, rows, features, limits.min_samples_leaf);
  if (!split.found) {
    placeholder.leaf_value = n_pos / n;
    return;
  }

  std::vector<std::size_t> left_rows;
  std::vector<std::size_t> right_rows;
  for (std::size_t r : rows) {
    if (data.x.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold) {
      left_rows.push_back(r);
    } else {
      right_rows.push_back(r);
    }
  }
  rows.clear();
  rows.shrink_to_fit();

  const int left_index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  const int right_index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  node.feature = split.feature;
  node.threshold = split.threshold;
  node.gain = split.decrease;
  node.left = left_index;
  node.right = right_index;

  grow_gini_tree(data, limits, mtry, rng, tree, std::move(left_rows), depth + 1, left_index);
  grow_gini_tree(data, limits, mtry, rng, tree, std::move(right_rows), depth + 1, right_index);
}

struct BoostSplit {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

BoostSplit best_boost_split(const LabeledDataset& data, const std::vector<std::size_t>& rows,
                            std::span<const double> g, std::span<const double> h,
                            const BoostConfig& config) {
  double g_total = 0.0;
  double h_total = 0.0;
  for (std::size_t r : rows) {
    g_total += g[r];
    h_total += h[r];
  }
  const double parent_score = g_total * g_total / (h_total + config.reg_lambda);

  BoostSplit best;
  std::vector<std::pair<double, std::size_t>> sorted(rows.size());
  for (std::size_t f = 0; f < data.n_cols(); ++f) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      sorted[k] = {data.x.at(rows[k], f), rows[k]};
    }
    std::sort(sorted.begin(), sorted.end());

    double g_left = 0.0;
    double h_left = 0.0;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      g_left += g[sorted[k].second];
      h_left += h[sorted[k].second];
      if (sorted[k].first == sorted[k + 1].first) {
        continue;
      }
      const double h_right = h_total - h_left;
      if (h_left < config.min_child_weight || h_right < config.min_child_weight) {
        continue;
      }
      const double g_right = g_total - g_left;
      const double gain = 0.5 * (g_left * g_left / (h_left + config.reg_lambda) +
                                 g_right * g_right / (h_right + config.reg_lambda) -
                                 parent_score);
      if (gain > best.gain) {
        double threshold = sorted[k].first + 0.5 * (sorted[k + 1].first - sorted[k].first);
        if (threshold >= sorted[k + 1].first) {
          threshold = sorted[k].first;
        }
        best.found = true;
        best.feature = static_cast<int>(f);
        best.threshold = threshold;
        best.gain = gain;
      }
    }
  }
  return best;
}

void grow_boost_tree(const LabeledDataset& data, std::span<const double> g,
                     std::span<const double> h, const BoostConfig& config, Tree& tree,
                     std::vector<std::size_t> rows, int depth, int node_index,
                     std::vector<double>& scores) {
  TreeNode& placeholder = tree.nodes[static_cast<std::size_t>(node_index)];
  placeholder.n_samples = static_cast<int>(rows.size());

  BoostSplit split;
  if (depth < config.max_depth && rows.size() >= 2) {
    split = best_boost_split(data, rows, g, h, config);
  }
  if (!split.found) {
    double g_sum = 0.0;
    double h_sum = 0.0;
    for (std::size_t r : rows) {
      g_sum += g[r];
      h_sum += h[r];
    }
    const double weight = -g_sum / (h_sum + config.reg_lambda);
    placeholder.leaf_value = weight;
    for (std::size_t r : rows) {
      scores[r] += config.learning_rate * weight;
    }
    return;
  }

  std::vector<std::size_t> left_rows;
  std::vector<std::size_t> right_rows;
  for (std::size_t r : rows) {
    if (data.x.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold) {
      left_rows.push_back(r);
    } else {
      right_rows.push_back(r);
    }
  }
  rows.clear();
  rows.shrink_to_fit();

  const int left_index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  const int right_index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  node.feature = split.feature;
  node.threshold = split.threshold;
  node.gain = split.gain;
  node.left = left_index;
  node.right = right_index;

  grow_boost_tree(data, g, h, config, tree, std::move(left_rows), depth + 1, left_index,
                  scores);
  grow_boost_tree(data, g, h, config, tree, std::move(right_rows), depth + 1, right_index,
                  scores);
}

double logistic(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

int resolve_mtry(const ForestConfig& config, std::size_t d) {
  if (config.mtry > 0) {
    if (static_cast<std::size_t>(config.mtry) > d) {
      throw ValidationError("mtry exceeds the feature count");
    }
    return config.mtry;
  }
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
}

std::vector<std::size_t> bootstrap_sample(std::size_t n, rng::Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = static_cast<std::size_t>(rng.uniform_int(n));
  }
  return idx;
}

Tree fit_tree(const LabeledDataset& train, const GrowthLimits& limits, int mtry,
              rng::Rng& rng) {
  train.validate();
  train.require_complete("fit_tree");
  if (limits.min_samples_leaf < 1) {
    throw ValidationError("fit_tree: min_samples_leaf must be positive");
  }
  Tree tree;
  tree.nodes.emplace_back();
  std::vector<std::size_t> rows(train.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const int effective_mtry = mtry <= 0 ? static_cast<int>(train.n_cols()) : mtry;
  grow_gini_tree(train, limits, effective_mtry, rng, tree, std::move(rows), 0, 0);
  return tree;
}

EnsembleModel fit_random_forest(const LabeledDataset& train, const ForestConfig& config,
                                int threads) {
  train.validate();
  train.require_complete("fit_random_forest");
  train.require_both_classes("fit_random_forest");
  if (config.n_trees < 1 || config.min_samples_leaf < 1) {
    throw ValidationError("fit_random_forest: n_trees and min_samples_leaf must be positive");
  }
  const int mtry = resolve_mtry(config, train.n_cols());
  const GrowthLimits limits{config.max_depth, config.min_samples_leaf};

  EnsembleModel model;
  model.kind = EnsembleKind::Forest;
  model.n_features = train.n_cols();
  model.config = config;
  model.trees.resize(static_cast<std::size_t>(config.n_trees));

  parallel_for(static_cast<std::size_t>(config.n_trees), threads, [&](std::size_t t) {
    rng::Rng rng(rng::mix({config.seed, 0x7EEE5ULL, static_cast<std::uint64_t>(t)}));
    Tree& tree = model.trees[t];
    tree.nodes.emplace_back();
    std::vector<std::size_t> rows;
    if (config.bootstrap) {
      rows = bootstrap_sample(train.n_rows(), rng);
    } else {
      rows.resize(train.n_rows());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    grow_gini_tree(train, limits, mtry, rng, tree, std::move(rows), 0, 0);
  });
  return model;
}

EnsembleModel fit_gradient_boosting(const LabeledDataset& train, const BoostConfig& config) {
  train.validate();
  train.require_complete("fit_gradient_boosting");
  train.require_both_classes("fit_gradient_boosting");
  if (config.n_rounds < 0) {
    throw ValidationError("fit_gradient_boosting: n_rounds must be nonnegative");
  }

  const std::size_t n = train.n_rows();
  const double prior =
      static_cast<double>(train.count_positive()) / static_cast<double>(n);

  EnsembleModel model;
  model.kind = EnsembleKind::Boosted;
  model.n_features = train.n_cols();
  model.config = config;
  model.base_score = std::log(prior / (1.0 - prior));

  std::vector<double> scores(n, model.base_score);
  std::vector<double> g(n);
  std::vector<double> h(n);

  for (int round = 0; round < config.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = logistic(scores[i]);
      g[i] = p - static_cast<double>(train.y[i]);
      h[i] = p * (1.0 - p);
    }
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow_boost_tree(train, g, h, config, tree, std::move(rows), 0, 0, scores);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

std::vector<double> predict_proba(const EnsembleModel& model, const FeatureMatrix& x) {
  if (x.n_cols() != model.n_features) {
    throw ValidationError("predict_proba: feature count " + std::to_string(x.n_cols()) +
                          " does not match training dimension " +
                          std::to_string(model.n_features));
  }
  std::vector<double> out(x.n_rows(), 0.0);
  if (model.kind == EnsembleKind::Forest) {
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      double sum = 0.0;
      for (const Tree& tree : model.trees) {
        sum += tree.predict(x.row(i));
      }
      out[i] = sum / static_cast<double>(model.trees.size());
    }
  } else {
    const double lr = std::get<BoostConfig>(model.config).learning_rate;
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      double score = model.base_score;
      for (const Tree& tree : model.trees) {
        score += lr * tree.predict(x.row(i));
      }
      out[i] = logistic(score);
    }
  }
  return out;
}

ImportanceReport gini_importance(const EnsembleModel& model,
                                 std::span<const FeatureMeta> meta) {
  if (meta.size() != model.n_features) {
    throw ValidationError("gini_importance: metadata length mismatch");
  }
  std::vector<double> scores(model.n_features, 0.0);
  for (const Tree& tree : model.trees) {
    const double root_n = static_cast<double>(tree.nodes.empty() ? 0 : tree.nodes[0].n_samples);
    if (root_n <= 0.0) {
      continue;
    }
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf()) {
        scores[static_cast<std::size_t>(node.feature)] +=
            (static_cast<double>(node.n_samples) / root_n) * node.gain;
      }
    }
  }
  if (!model.trees.empty()) {
    for (double& s : scores) {
      s /= static_cast<double>(model.trees.size());
    }
  }
  double total = 0.0;
  for (double s : scores) {
    total += s;
  }
  if (total > 0.0) {
    for (double& s : scores) {
      s /= total;
    }
  }

  ImportanceReport report;
  report.method = ImportanceMethod::Gini;
  report.model_kind = model.kind == EnsembleKind::Forest ? "rf" : "gbm";
  for (std::size_t j = 0; j < meta.size(); ++j) {
    report.feature_names.push_back(meta[j].name);
  }
  report.scores = std::move(scores);
  return report;
}

}  // namespace featimp::trees
