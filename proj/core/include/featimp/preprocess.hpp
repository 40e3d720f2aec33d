#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "featimp/matrix.hpp"

namespace featimp {

/// Centers and scales every column to mean 0 and unit population variance.
/// When stats are supplied (test-set path) they are applied unchanged.
/// Constant training columns become all-zero with std recorded as 1 and the
/// constant flag set.
std::pair<FeatureMatrix, StandardizationStats> standardize(
    const FeatureMatrix& x, const std::optional<StandardizationStats>& stats = std::nullopt);

struct SplitResult {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Stratified train/test split. The test set receives round(fraction * N)
/// rows, apportioned per class by largest remainder so class proportions
/// match within one sample per class. Deterministic for a fixed seed.
SplitResult split_train_test(const LabeledDataset& data, double test_fraction,
                             std::uint64_t seed);

/// Stratified fold assignment for cross validation: fold id per row, each
/// class spread within +-1 across folds. Deterministic for a fixed seed.
std::vector<int> stratified_folds(std::span<const int> y, int n_folds, std::uint64_t seed);

}  // namespace featimp
