#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "featimp/importance.hpp"
#include "featimp/linear.hpp"
#include "featimp/matrix.hpp"
#include "featimp/trees.hpp"

namespace featimp::interpret {

/// Uniform prediction interface over linear and ensemble models.
/// Class prediction uses p > 0.5 everywhere; a tie at exactly 0.5 is class 0.
class Predictor {
 public:
  explicit Predictor(linear::LinearModel model) : model_(std::move(model)) {}
  explicit Predictor(trees::EnsembleModel model) : model_(std::move(model)) {}

  std::vector<double> predict_proba(const FeatureMatrix& x) const;
  std::vector<int> predict_class(const FeatureMatrix& x) const;

  /// "lr", "rf", or "gbm".
  std::string kind() const;

  const linear::LinearModel* linear_model() const {
    return std::get_if<linear::LinearModel>(&model_);
  }
  const trees::EnsembleModel* ensemble_model() const {
    return std::get_if<trees::EnsembleModel>(&model_);
  }

 private:
  std::variant<linear::LinearModel, trees::EnsembleModel> model_;
};

/// Mean decrease in test-set accuracy when each feature column is shuffled.
/// The permutation for feature j, repeat r is drawn from mix(seed, j, r), so
/// reports are reproducible and independent of evaluation order. The caller's
/// dataset is never mutated.
ImportanceReport permutation_importance(const Predictor& model, const LabeledDataset& test,
                                        std::uint64_t seed, int repeats = 1, int threads = 1);

struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> r;
  std::vector<bool> degenerate;  // per-report flag: constant score vector
};

/// Pairwise Pearson correlation of importance reports over a shared feature
/// set. Constant vectors correlate as 0 and are flagged; the diagonal is 1.
CorrelationMatrix importance_correlation(std::span<const ImportanceReport> reports);

struct DendrogramMerge {
  int a = 0;  // cluster ids: leaves are 0..n-1, merge k creates id n+k
  int b = 0;
  double height = 0.0;
  int size = 0;
};

struct Dendrogram {
  std::vector<int> leaf_order;
  std::vector<DendrogramMerge> merges;
};

struct BiclusterResult {
  Dendrogram rows;
  Dendrogram cols;
};

/// Independent agglomerative clustering of rows and columns: Euclidean
/// distance, average linkage, ties broken by lowest cluster id pair.
BiclusterResult bicluster(const FeatureMatrix& values);

/// Feature indices sorted by descending score, ties by ascending index.
std::vector<std::size_t> top_k_features(const ImportanceReport& report, std::size_t k);

}  // namespace featimp::interpret
