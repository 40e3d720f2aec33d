#include "featimp/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "featimp/rng.hpp"

namespace featimp {

std::pair<FeatureMatrix, StandardizationStats> standardize(
    const FeatureMatrix& x, const std::optional<StandardizationStats>& stats) {
  const std::size_t n = x.n_rows();
  const std::size_t d = x.n_cols();
  if (x.has_missing()) {
    throw ValidationError("standardize: input contains missing values");
  }

  StandardizationStats s;
  if (stats.has_value()) {
    if (stats->size() != d) {
      throw ValidationError("standardize: stats dimension " + std::to_string(stats->size()) +
                            " does not match column count " + std::to_string(d));
    }
    s = *stats;
  } else {
    s.means.resize(d);
    s.stds.resize(d);
    s.constant_flags.assign(d, false);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mean += x.at(i, j);
      }
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dv = x.at(i, j) - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(n);  // population variance
      s.means[j] = mean;
      if (var <= 0.0) {
        s.stds[j] = 1.0;
        s.constant_flags[j] = true;
      } else {
        s.stds[j] = std::sqrt(var);
      }
    }
  }

  FeatureMatrix out(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    const double mean = s.means[j];
    const double inv = 1.0 / s.stds[j];
    const bool constant = s.constant_flags[j];
    for (std::size_t i = 0; i < n; ++i) {
      out.at(i, j) = constant ? 0.0 : (x.at(i, j) - mean) * inv;
    }
  }
  return {std::move(out), std::move(s)};
}

namespace {

// Largest-remainder apportionment of the global test quota across classes.
std::vector<std::size_t> class_test_counts(const std::vector<std::size_t>& class_sizes,
                                           double fraction) {
  std::size_t total = 0;
  for (std::size_t c : class_sizes) {
    total += c;
  }
  const auto target =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));

  std::vector<std::size_t> counts(class_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < class_sizes.size(); ++k) {
    const double quota = fraction * static_cast<double>(class_sizes[k]);
    counts[k] = static_cast<std::size_t>(std::floor(quota));
    counts[k] = std::min(counts[k], class_sizes[k]);
    assigned += counts[k];
    remainders.emplace_back(quota - std::floor(quota), k);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return a.first > b.first;
    }
    return a.second < b.second;
  });
  for (const auto& [rem, k] : remainders) {
    if (assigned >= target) {
      break;
    }
    if (counts[k] < class_sizes[k]) {
      ++counts[k];
      ++assigned;
    }
  }
  return counts;
}

}  // namespace

SplitResult split_train_test(const LabeledDataset& data, double test_fraction,
                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("split_train_test: test_fraction must be in (0, 1)");
  }
  data.require_both_classes("split_train_test");

  std::vector<std::size_t> class_indices[2];
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    class_indices[data.y[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (class_indices[c].size() < 2) {
      throw ValidationError("split_train_test: class " + std::to_string(c) +
                            " has fewer than 2 samples");
    }
  }

  const std::vector<std::size_t> sizes{class_indices[0].size(), class_indices[1].size()};
  const std::vector<std::size_t> test_counts = class_test_counts(sizes, test_fraction);

  SplitResult result;
  for (int c = 0; c < 2; ++c) {
    auto& idx = class_indices[c];
    rng::Rng rng(rng::mix({seed, 0x5B117ULL, static_cast<std::uint64_t>(c)}));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < test_counts[c]) {
        result.test_indices.push_back(idx[i]);
      } else {
        result.train_indices.push_back(idx[i]);
      }
    }
  }
  std::sort(result.train_indices.begin(), result.train_indices.end());
  std::sort(result.test_indices.begin(), result.test_indices.end());
  result.train = data.subset(result.train_indices);
  result.test = data.subset(result.test_indices);
  return result;
}

std::vector<int> stratified_folds(std::span<const int> y, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) {
    throw ValidationError("stratified_folds: need at least 2 folds");
  }
  std::size_t counts[2] = {0, 0};
  for (int v : y) {
    ++counts[v];
  }
  if (std::min(counts[0], counts[1]) < static_cast<std::size_t>(n_folds)) {
    throw ValidationError("stratified_folds: fold count " + std::to_string(n_folds) +
                          " exceeds the minority class size");
  }
  std::vector<int> fold(y.size(), 0);
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) {
        idx.push_back(i);
      }
    }
    rng::Rng rng(rng::mix({seed, 0xF01DULL, static_cast<std::uint64_t>(c)}));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
    }
  }
  return fold;
}

}  // namespace featimp
