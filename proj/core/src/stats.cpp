#include "featimp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "featimp/errors.hpp"

namespace featimp::stats {

namespace {

/// Midranks (1-based) of the values; ties share the average rank.
std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      ranks[order[k]] = shared;
    }
    i = j + 1;
  }
  return ranks;
}

bool has_ties(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  return std::adjacent_find(pooled.begin(), pooled.end()) != pooled.end();
}

/// Null distribution of the rank sum of a sample of size na drawn from ranks
/// 1..n: counts[s] = number of size-na subsets with rank sum s.
std::vector<double> rank_sum_counts(std::size_t n, std::size_t na) {
  const std::size_t max_sum = n * (n + 1) / 2;
  // dp[k][s] over items 1..n, built in-place with reverse iteration.
  std::vector<std::vector<double>> dp(na + 1, std::vector<double>(max_sum + 1, 0.0));
  dp[0][0] = 1.0;
  for (std::size_t item = 1; item <= n; ++item) {
    for (std::size_t k = std::min(na, item); k >= 1; --k) {
      for (std::size_t s = max_sum; s >= item; --s) {
        dp[k][s] += dp[k - 1][s - item];
      }
    }
  }
  return dp[na];
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

RocResult auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("auroc: score and label lengths differ");
  }
  if (scores.empty()) {
    throw ValidationError("auroc: empty input");
  }
  RocResult result;
  for (int y : labels) {
    if (y == 1) {
      ++result.n_pos;
    } else if (y == 0) {
      ++result.n_neg;
    } else {
      throw ValidationError("auroc: labels must be 0 or 1");
    }
  }
  if (result.n_pos == 0 || result.n_neg == 0) {
    throw ValidationError("auroc: both classes must be present");
  }
  const std::vector<double> ranks = midranks(scores);
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos_rank_sum += ranks[i];
    }
  }
  const double n_pos = static_cast<double>(result.n_pos);
  const double n_neg = static_cast<double>(result.n_neg);
  const double u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  result.auroc = u / (n_pos * n_neg);
  return result;
}

TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw ValidationError("wilcoxon_rank_sum: empty sample");
  }
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = midranks(pooled);
  double w = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    w += ranks[i];
  }

  TestResult result;
  result.statistic = w;

  if (n <= 20 && !has_ties(a, b)) {
    // Exact path: tie-free midranks are integers, so w is integral.
    const std::vector<double> counts = rank_sum_counts(n, na);
    double total = 0.0;
    for (double c : counts) {
      total += c;
    }
    const auto w_int = static_cast<std::size_t>(std::llround(w));
    double lower = 0.0;
    double upper = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (s <= w_int) {
        lower += counts[s];
      }
      if (s >= w_int) {
        upper += counts[s];
      }
    }
    const double tail = std::min(lower, upper);
    result.p_value = std::min(1.0, 2.0 * tail / total);
    result.exact = true;
    return result;
  }

  // Normal approximation with tie correction and continuity correction.
  const double mean = static_cast<double>(na) * static_cast<double>(n + 1) / 2.0;
  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) {
      ++j;
    }
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double nn = static_cast<double>(n);
  const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                     ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    result.p_value = 1.0;  // all pooled values identical
    return result;
  }
  const double diff = w - mean;
  const double cc = diff > 0 ? -0.5 : (diff < 0 ? 0.5 : 0.0);
  const double z = (diff + cc) / std::sqrt(var);
  result.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::fabs(z))));
  return result;
}

std::vector<double> bonferroni(std::span<const double> p_values) {
  const double m = static_cast<double>(p_values.size());
  std::vector<double> adjusted;
  adjusted.reserve(p_values.size());
  for (double p : p_values) {
    if (p < 0.0 || p > 1.0) {
      throw ValidationError("bonferroni: p-values must lie in [0, 1]");
    }
    adjusted.push_back(std::min(1.0, m * p));
  }
  return adjusted;
}

PearsonResult pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("pearson: input lengths differ");
  }
  if (a.size() < 2) {
    throw ValidationError("pearson: need at least 2 observations");
  }
  // Streaming co-moment accumulation (Welford-style).
  double mean_a = 0.0;
  double mean_b = 0.0;
  double m2a = 0.0;
  double m2b = 0.0;
  double cab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    mean_a += da / k;
    mean_b += db / k;
    m2a += da * (a[i] - mean_a);
    m2b += db * (b[i] - mean_b);
    cab += da * (b[i] - mean_b);
  }
  if (m2a <= 0.0 || m2b <= 0.0) {
    return {0.0, false};
  }
  const double r = cab / std::sqrt(m2a * m2b);
  return {std::clamp(r, -1.0, 1.0), true};
}

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) {
    throw ValidationError("accuracy: length mismatch or empty input");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    hits += truth[i] == predicted[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace featimp::stats
