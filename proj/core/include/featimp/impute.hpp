#pragma once

#include <vector>

#include "featimp/matrix.hpp"

namespace featimp::impute {

struct SoftImputeConfig {
  double shrinkage = 0.0;     // absolute singular-value threshold
  int max_rank = 1;           // <= min(n_rows, n_cols)
  double tolerance = 1e-5;    // relative Frobenius change
  int max_iterations = 200;
};

struct SoftImputeResult {
  FeatureMatrix completed;
  bool converged = false;
  int n_iterations = 0;

  // One entry per iteration: 0.5 * sum_obs (x - z)^2 + shrinkage * nuclear_norm(z),
  // and the reconstruction rank after thresholding.
  std::vector<double> objective_history;
  std::vector<int> rank_history;

  // Frozen training artifacts for completing new rows.
  std::vector<double> column_centers;
  std::vector<double> feature_basis;  // n_cols x rank, column-major (right singular vectors)
  int rank = 0;
};

/// Iterative soft-thresholded SVD matrix completion. Observed entries are
/// returned exactly as given; missing entries come from the converged
/// low-rank reconstruction. Columns are centered before iteration and the
/// centers restored afterward; the initial fill is the column mean.
SoftImputeResult soft_impute(const FeatureMatrix& x, const SoftImputeConfig& config);

/// Fills missing cells of new rows against a frozen fit: alternates between
/// projecting the centered row onto the training feature basis and rewriting
/// only the missing entries, leaving observed entries untouched. Labels are
/// never consulted.
FeatureMatrix complete_rows(const SoftImputeResult& fit, const FeatureMatrix& rows,
                            double tolerance = 1e-8, int max_iterations = 100);

/// Missing entries replaced by the column mean of observed entries.
FeatureMatrix mean_impute(const FeatureMatrix& x);

/// Column means over observed entries; errors on an all-missing column.
std::vector<double> observed_column_means(const FeatureMatrix& x);

/// Fills missing cells with the supplied per-column values (frozen-mean path).
FeatureMatrix fill_missing_with(const FeatureMatrix& x, std::span<const double> column_fill);

/// Largest singular value of the mean-filled, column-centered matrix; the
/// scale-free reference for choosing the shrinkage threshold.
double initial_singular_scale(const FeatureMatrix& x);

}  // namespace featimp::impute
