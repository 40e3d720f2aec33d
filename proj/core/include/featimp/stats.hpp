#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace featimp::stats {

struct RocResult {
  double auroc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Rank-based AUROC with midrank tie handling; exactly equals the pairwise
/// P(score_pos > score_neg) + 0.5 * P(tie) definition.
RocResult auroc(std::span<const double> scores, std::span<const int> labels);

struct TestResult {
  double statistic = 0.0;  // rank sum of sample a (midranks)
  double p_value = 1.0;
  std::optional<double> p_adjusted;
  bool exact = false;  // true when the enumeration path was used
};

/// Two-sided Wilcoxon rank-sum test. Exact enumeration of the null rank-sum
/// distribution when |a|+|b| <= 20 and there are no ties; otherwise normal
/// approximation with tie and continuity corrections.
TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);

/// p' = min(1, m * p) with m = p.size().
std::vector<double> bonferroni(std::span<const double> p_values);

struct PearsonResult {
  double r = 0.0;
  bool defined = true;  // false when either input is constant (r reported as 0)
};

/// Product-moment correlation via streaming co-moment updates.
PearsonResult pearson(std::span<const double> a, std::span<const double> b);

/// Standard normal CDF.
double normal_cdf(double z);

/// Fraction of positions where the two sequences agree.
double accuracy(std::span<const int> truth, std::span<const int> predicted);

}  // namespace featimp::stats
