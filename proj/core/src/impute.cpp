#include "featimp/impute.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace featimp::impute {

namespace {

struct CenteredProblem {
  Eigen::MatrixXd observed;              // centered values; 0 in missing slots
  std::vector<std::uint8_t> missing;     // row-major mask
  std::vector<double> centers;
  std::size_t n_missing = 0;
};

CenteredProblem center_and_mask(const FeatureMatrix& x) {
  const std::size_t n = x.n_rows();
  const std::size_t d = x.n_cols();
  CenteredProblem p;
  p.observed.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  p.missing.assign(n * d, 0);
  p.centers.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x.at(i, j);
      if (!FeatureMatrix::is_missing(v)) {
        sum += v;
        ++count;
      }
    }
    if (count == 0) {
      throw ValidationError("column " + std::to_string(j) +
                            " is entirely missing; cannot impute");
    }
    p.centers[j] = sum / static_cast<double>(count);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x.at(i, j);
      if (FeatureMatrix::is_missing(v)) {
        p.missing[i * d + j] = 1;
        ++p.n_missing;
      } else {
        p.observed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            v - p.centers[j];
      }
    }
  }
  return p;
}

}  // namespace

std::vector<double> observed_column_means(const FeatureMatrix& x) {
  return center_and_mask(x).centers;
}

FeatureMatrix fill_missing_with(const FeatureMatrix& x, std::span<const double> column_fill) {
  if (column_fill.size() != x.n_cols()) {
    throw ValidationError("fill_missing_with: fill vector length mismatch");
  }
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    for (std::size_t j = 0; j < x.n_cols(); ++j) {
      if (FeatureMatrix::is_missing(out.at(i, j))) {
        out.at(i, j) = column_fill[j];
      }
    }
  }
  return out;
}

FeatureMatrix mean_impute(const FeatureMatrix& x) {
  return fill_missing_with(x, observed_column_means(x));
}

double initial_singular_scale(const FeatureMatrix& x) {
  const CenteredProblem p = center_and_mask(x);
  // Missing slots are already 0 = the centered column mean.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(p.observed);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

SoftImputeResult soft_impute(const FeatureMatrix& x, const SoftImputeConfig& config) {
  const std::size_t n = x.n_rows();
  const std::size_t d = x.n_cols();
  if (config.shrinkage < 0.0) {
    throw ValidationError("soft_impute: shrinkage must be nonnegative");
  }
  if (config.max_rank < 1 ||
      static_cast<std::size_t>(config.max_rank) > std::min(n, d)) {
    throw ValidationError("soft_impute: max_rank must lie in [1, min(n_rows, n_cols)]");
  }
  if (config.tolerance <= 0.0 || config.max_iterations < 1) {
    throw ValidationError("soft_impute: tolerance and max_iterations must be positive");
  }

  CenteredProblem p = center_and_mask(x);

  SoftImputeResult result;
  result.completed = x;
  result.column_centers = p.centers;

  if (p.n_missing == 0) {
    result.converged = true;
    result.rank = 0;
    return result;
  }

  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d);

  // Z holds the current reconstruction; the working matrix overlays observed
  // entries on top of Z's values at missing slots. Column-mean start = zeros.
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::MatrixXd filled = p.observed;

  Eigen::MatrixXd basis;         // right singular vectors of the kept block
  Eigen::VectorXd kept_values;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();

    int kept = 0;
    for (Eigen::Index k = 0; k < sv.size() && kept < config.max_rank; ++k) {
      if (sv(k) > config.shrinkage) {
        ++kept;
      }
    }

    Eigen::MatrixXd z_new;
    double nuclear = 0.0;
    if (kept == 0) {
      z_new = Eigen::MatrixXd::Zero(rows, cols);
      basis.resize(cols, 0);
      kept_values.resize(0);
    } else {
      kept_values = sv.head(kept).array() - config.shrinkage;
      basis = svd.matrixV().leftCols(kept);
      z_new = svd.matrixU().leftCols(kept) * kept_values.asDiagonal() * basis.transpose();
      nuclear = kept_values.sum();
    }

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (!p.missing[i * d + j]) {
          const double diff = p.observed(static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(j)) -
                              z_new(static_cast<Eigen::Index>(i),
                                    static_cast<Eigen::Index>(j));
          sse += diff * diff;
        }
      }
    }
    result.objective_history.push_back(0.5 * sse + config.shrinkage * nuclear);
    result.rank_history.push_back(kept);
    result.n_iterations = iter + 1;

    const double change = (z_new - z).norm();
    const double base = z.norm();
    const double relative = base > 0.0 ? change / base : (change > 0.0 ? 1.0 : 0.0);

    z = std::move(z_new);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (p.missing[i * d + j]) {
          filled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      }
    }

    if (relative < config.tolerance) {
      result.converged = true;
      break;
    }
  }

  result.rank = static_cast<int>(basis.cols());
  result.feature_basis.resize(d * static_cast<std::size_t>(result.rank));
  for (int k = 0; k < result.rank; ++k) {
    for (std::size_t j = 0; j < d; ++j) {
      result.feature_basis[static_cast<std::size_t>(k) * d + j] =
          basis(static_cast<Eigen::Index>(j), k);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (p.missing[i * d + j]) {
        result.completed.at(i, j) =
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + p.centers[j];
      }
    }
  }
  return result;
}

FeatureMatrix complete_rows(const SoftImputeResult& fit, const FeatureMatrix& rows,
                            double tolerance, int max_iterations) {
  const std::size_t d = rows.n_cols();
  if (fit.column_centers.size() != d) {
    throw ValidationError("complete_rows: column count does not match the fit");
  }
  FeatureMatrix out = rows;
  const int r = fit.rank;
  Eigen::Map<const Eigen::MatrixXd> basis(fit.feature_basis.data(),
                                          static_cast<Eigen::Index>(d), r);
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    std::vector<std::size_t> miss;
    for (std::size_t j = 0; j < d; ++j) {
      if (FeatureMatrix::is_missing(rows.at(i, j))) {
        miss.push_back(j);
      }
    }
    if (miss.empty()) {
      continue;
    }
    // Centered row, mean-initialized, refined by alternating projection onto
    // the frozen training basis.
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
      const double raw = rows.at(i, j);
      v(static_cast<Eigen::Index>(j)) =
          FeatureMatrix::is_missing(raw) ? 0.0 : raw - fit.column_centers[j];
    }
    if (r > 0) {
      for (int it = 0; it < max_iterations; ++it) {
        const Eigen::VectorXd projected = basis * (basis.transpose() * v);
        double change = 0.0;
        for (std::size_t j : miss) {
          const auto jj = static_cast<Eigen::Index>(j);
          change += std::fabs(projected(jj) - v(jj));
          v(jj) = projected(jj);
        }
        if (change < tolerance) {
          break;
        }
      }
    }
    for (std::size_t j : miss) {
      out.at(i, j) = v(static_cast<Eigen::Index>(j)) + fit.column_centers[j];
    }
  }
  return out;
}

}  // namespace featimp::impute
