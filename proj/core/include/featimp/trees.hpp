#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "featimp/importance.hpp"
#include "featimp/matrix.hpp"
#include "featimp/rng.hpp"

namespace featimp::trees {

/// Flat-array tree node. feature < 0 marks a leaf. For forest trees
/// leaf_value is the class-1 probability; for boosted trees it is the
/// additive weight before scaling by the learning rate.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // Gini impurity decrease, or regularized gain for boosting
  int n_samples = 0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const {
    int i = 0;
    while (!nodes[i].is_leaf()) {
      i = row[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
              ? nodes[i].left
              : nodes[i].right;
    }
    return nodes[i].leaf_value;
  }
};

struct GrowthLimits {
  int max_depth = -1;  // < 0 means unlimited
  int min_samples_leaf = 1;
};

struct ForestConfig {
  int n_trees = 500;
  int max_depth = -1;
  int min_samples_leaf = 1;
  int mtry = 0;  // features sampled per split; 0 means ceil(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct BoostConfig {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double reg_lambda = 1.0;      // leaf-weight L2 penalty
  double min_child_weight = 1.0;
  std::uint64_t seed = 0;
};

enum class EnsembleKind { Forest, Boosted };

struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::Forest;
  std::vector<Tree> trees;
  double base_score = 0.0;  // prior log-odds; boosted ensembles only
  std::size_t n_features = 0;
  std::variant<ForestConfig, BoostConfig> config;
};

/// Grows one CART classification tree with the Gini criterion. Candidate
/// thresholds are the midpoints of consecutive distinct sorted values; the
/// split maximizing the weighted impurity decrease wins, ties broken by
/// lowest feature index then lowest threshold. mtry <= 0 uses all features.
Tree fit_tree(const LabeledDataset& train, const GrowthLimits& limits, int mtry,
              rng::Rng& rng);

/// Bagged forest of Gini trees; prediction is the mean leaf probability.
EnsembleModel fit_random_forest(const LabeledDataset& train, const ForestConfig& config,
                                int threads = 1);

/// Newton boosting on logistic loss: gradient p - y, hessian p(1-p), split
/// gain and leaf weights from the reg_lambda-regularized second-order
/// objective, learning_rate scaling per round.
EnsembleModel fit_gradient_boosting(const LabeledDataset& train, const BoostConfig& config);

/// Forest: mean leaf probability. Boosted: logistic(base + lr * sum of leaf
/// weights). Class calls use p > 0.5.
std::vector<double> predict_proba(const EnsembleModel& model, const FeatureMatrix& x);

/// score_j = sum over splits on j of (split n / root n) * recorded gain,
/// averaged over trees and normalized to sum 1 (all-zero when no splits).
ImportanceReport gini_importance(const EnsembleModel& model,
                                 std::span<const FeatureMeta> meta);

/// n indices drawn with replacement from [0, n).
std::vector<std::size_t> bootstrap_sample(std::size_t n, rng::Rng& rng);

/// Effective features-per-split for a forest config on d features.
int resolve_mtry(const ForestConfig& config, std::size_t d);

}  // namespace featimp::trees
