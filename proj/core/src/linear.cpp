#include "featimp/linear.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "featimp/stats.hpp"

namespace featimp::linear {

namespace {

constexpr double kGradientTol = 1e-8;
constexpr double kCoefficientTol = 1e-8;
constexpr int kMaxNewtonIterations = 200;
constexpr int kMaxCdSweeps = 20000;
constexpr double kSeparationBetaLimit = 35.0;

double logistic(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

/// log(1 + exp(eta)) without overflow.
double log1p_exp(double eta) {
  if (eta > 0.0) {
    return eta + std::log1p(std::exp(-eta));
  }
  return std::log1p(std::exp(eta));
}

void require_standardized(const LabeledDataset& data) {
  const std::size_t n = data.n_rows();
  for (std::size_t j = 0; j < data.n_cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean += data.x.at(i, j);
    }
    mean /= static_cast<double>(n);
    if (std::fabs(mean) > 1e-6) {
      throw ValidationError("fit_logistic: column " + std::to_string(j) +
                            " is not centered (mean " + std::to_string(mean) +
                            "); standardize the input first");
    }
  }
}

std::vector<double> linear_scores(const LabeledDataset& data, std::span<const double> beta) {
  std::vector<double> eta(data.n_rows(), 0.0);
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    const auto row = data.x.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      s += beta[j] * row[j];
    }
    eta[i] = s;
  }
  return eta;
}

double log_likelihood_from_scores(const LabeledDataset& data, std::span<const double> eta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    ll += static_cast<double>(data.y[i]) * eta[i] - log1p_exp(eta[i]);
  }
  return ll;
}

LinearModel fit_l2_newton(const LabeledDataset& train, const PenaltyConfig& penalty) {
  const auto n = static_cast<Eigen::Index>(train.n_rows());
  const auto d = static_cast<Eigen::Index>(train.n_cols());
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = train.x.row(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = row[static_cast<std::size_t>(j)];
    }
    y(i) = static_cast<double>(train.y[static_cast<std::size_t>(i)]);
  }

  const double lambda = penalty.lambda;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);

  const auto objective = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      ll += y(i) * eta(i) - log1p_exp(eta(i));
    }
    return ll - lambda * b.squaredNorm();
  };

  const auto gradient_at = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = x * b;
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = logistic(eta(i));
    }
    return Eigen::VectorXd(x.transpose() * (y - p) - 2.0 * lambda * b);
  };

  LinearModel model;
  model.penalty = penalty;
  double current = objective(beta);
  Eigen::VectorXd grad = gradient_at(beta);

  for (int iter = 0; iter < kMaxNewtonIterations; ++iter) {
    model.n_iterations = iter;
    if (grad.norm() < kGradientTol) {
      model.converged = true;
      break;
    }
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = logistic(eta(i));
      w(i) = std::max(p * (1.0 - p), 1e-12);
    }
    Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x;
    hess.diagonal().array() += 2.0 * lambda + 1e-12;
    const Eigen::VectorXd direction = hess.ldlt().solve(grad);

    // Full Newton step whenever it shrinks the gradient (terminal quadratic
    // phase, where objective differences fall below double precision);
    // otherwise damp by backtracking on the objective.
    const Eigen::VectorXd full = beta + direction;
    const Eigen::VectorXd full_grad = gradient_at(full);
    if (full_grad.norm() < grad.norm()) {
      beta = full;
      grad = full_grad;
      current = objective(beta);
      continue;
    }

    double step = 1.0;
    const double slope = grad.dot(direction);
    bool advanced = false;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      const Eigen::VectorXd candidate = beta + step * direction;
      const double value = objective(candidate);
      if (value >= current + 1e-4 * step * slope) {
        beta = candidate;
        current = value;
        grad = gradient_at(beta);
        advanced = true;
        break;
      }
      step *= 0.5;
    }
    if (!advanced) {
      break;  // numerically stuck; the loop-top gradient test decides the flag
    }
  }
  model.converged = model.converged || grad.norm() < kGradientTol;

  model.beta.assign(beta.data(), beta.data() + d);
  return model;
}

LinearModel fit_l1_coordinate_descent(const LabeledDataset& train,
                                      const PenaltyConfig& penalty) {
  const std::size_t n = train.n_rows();
  const std::size_t d = train.n_cols();
  const double lambda = penalty.lambda;

  // Curvature bound per coordinate: hessian of the log-likelihood in beta_j
  // is at most sum_i x_ij^2 / 4.
  std::vector<double> curvature(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = train.x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      curvature[j] += 0.25 * row[j] * row[j];
    }
  }

  std::vector<double> beta(d, 0.0);
  std::vector<double> eta(n, 0.0);

  LinearModel model;
  model.penalty = penalty;

  for (int sweep = 0; sweep < kMaxCdSweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (curvature[j] <= 0.0) {
        continue;  // constant zero column
      }
      double grad = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        grad += train.x.at(i, j) * (static_cast<double>(train.y[i]) - logistic(eta[i]));
      }
      const double u = beta[j] * curvature[j] + grad;
      const double shrunk = std::fabs(u) > lambda
                                ? std::copysign(std::fabs(u) - lambda, u)
                                : 0.0;
      const double updated = shrunk / curvature[j];
      const double delta = updated - beta[j];
      if (delta != 0.0) {
        beta[j] = updated;
        for (std::size_t i = 0; i < n; ++i) {
          eta[i] += delta * train.x.at(i, j);
        }
      }
      max_change = std::max(max_change, std::fabs(delta));
    }
    model.n_iterations = sweep + 1;
    if (max_change < kCoefficientTol) {
      model.converged = true;
      break;
    }
  }

  model.beta = std::move(beta);
  return model;
}

}  // namespace

std::string to_string(PenaltyNorm norm) { return norm == PenaltyNorm::L1 ? "l1" : "l2"; }

PenaltyNorm penalty_norm_from_string(const std::string& s) {
  if (s == "l1" || s == "L1" || s == "lasso") {
    return PenaltyNorm::L1;
  }
  if (s == "l2" || s == "L2" || s == "ridge") {
    return PenaltyNorm::L2;
  }
  throw ValidationError("unknown penalty norm: " + s);
}

LinearModel fit_logistic(const LabeledDataset& train, const PenaltyConfig& penalty) {
  train.validate();
  train.require_complete("fit_logistic");
  train.require_both_classes("fit_logistic");
  if (penalty.lambda < 0.0) {
    throw ValidationError("fit_logistic: lambda must be nonnegative");
  }
  require_standardized(train);
  return penalty.norm == PenaltyNorm::L2 ? fit_l2_newton(train, penalty)
                                         : fit_l1_coordinate_descent(train, penalty);
}

std::vector<double> predict_proba(const LinearModel& model, const FeatureMatrix& x) {
  if (x.n_cols() != model.beta.size()) {
    throw ValidationError("predict_proba: feature count " + std::to_string(x.n_cols()) +
                          " does not match model dimension " +
                          std::to_string(model.beta.size()));
  }
  std::vector<double> p(x.n_rows());
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    const auto row = x.row(i);
    double eta = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      eta += model.beta[j] * row[j];
    }
    p[i] = logistic(eta);
  }
  return p;
}

ImportanceReport coefficient_importance(const LinearModel& model,
                                        std::span<const FeatureMeta> meta) {
  if (meta.size() != model.beta.size()) {
    throw ValidationError("coefficient_importance: metadata length mismatch");
  }
  ImportanceReport report;
  report.method = ImportanceMethod::Coefficient;
  report.model_kind = "lr";
  for (std::size_t j = 0; j < meta.size(); ++j) {
    report.feature_names.push_back(meta[j].name);
    report.scores.push_back(std::fabs(model.beta[j]));
  }
  return report;
}

std::vector<UnivariateResult> univariate_fits(const LabeledDataset& train, double alpha) {
  train.validate();
  train.require_complete("univariate_fits");
  const std::size_t n = train.n_rows();
  const std::size_t d = train.n_cols();

  std::vector<UnivariateResult> results(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto& res = results[j];
    const std::vector<double> col = train.x.column(j);

    double sum_sq = 0.0;
    for (double v : col) {
      sum_sq += v * v;
    }
    if (sum_sq <= 0.0) {
      res = {0.0, 1.0, false, false};  // constant feature: no association possible
      continue;
    }

    // Quasi-separation check for the zero-intercept model: the likelihood has
    // no finite maximizer iff every nonzero x_i * (2 y_i - 1) shares one sign.
    std::size_t agree = 0;
    std::size_t disagree = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double signed_value = col[i] * (2.0 * static_cast<double>(train.y[i]) - 1.0);
      if (signed_value > 0.0) {
        ++agree;
      } else if (signed_value < 0.0) {
        ++disagree;
      }
    }
    const bool separated = (disagree == 0 && agree > 0) || (agree == 0 && disagree > 0);

    // Zero-intercept single-coefficient Newton iteration.
    double b = 0.0;
    bool diverged = separated;
    for (int iter = 0; iter < 100; ++iter) {
      double grad = 0.0;
      double info = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = logistic(b * col[i]);
        grad += col[i] * (static_cast<double>(train.y[i]) - p);
        info += col[i] * col[i] * p * (1.0 - p);
      }
      if (std::fabs(grad) < 1e-10) {
        break;
      }
      if (info < 1e-12) {
        diverged = true;
        break;
      }
      b += grad / info;
      if (std::fabs(b) > kSeparationBetaLimit) {
        diverged = true;
        break;
      }
    }

    res.beta_hat = b;
    if (diverged) {
      res.separation = true;
      res.p_value = 0.0;
    } else {
      double info = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = logistic(b * col[i]);
        info += col[i] * col[i] * p * (1.0 - p);
      }
      if (info <= 0.0) {
        res.p_value = 1.0;
      } else {
        const double z = b * std::sqrt(info);
        res.p_value = 2.0 * (1.0 - stats::normal_cdf(std::fabs(z)));
      }
    }
    res.significant = res.p_value < alpha;
  }
  return results;
}

ImportanceReport univariate_screen(const LabeledDataset& train, double alpha) {
  const std::vector<UnivariateResult> fits = univariate_fits(train, alpha);
  ImportanceReport report;
  report.method = ImportanceMethod::Univariate;
  for (std::size_t j = 0; j < fits.size(); ++j) {
    report.feature_names.push_back(train.meta[j].name);
    report.scores.push_back(fits[j].significant ? std::fabs(fits[j].beta_hat) : 0.0);
  }
  return report;
}

double penalized_objective(const LabeledDataset& data, std::span<const double> beta,
                           const PenaltyConfig& penalty) {
  const std::vector<double> eta = linear_scores(data, beta);
  double value = log_likelihood_from_scores(data, eta);
  if (penalty.norm == PenaltyNorm::L2) {
    for (double b : beta) {
      value -= penalty.lambda * b * b;
    }
  } else {
    for (double b : beta) {
      value -= penalty.lambda * std::fabs(b);
    }
  }
  return value;
}

double smooth_objective(const LabeledDataset& data, std::span<const double> beta,
                        const PenaltyConfig& penalty) {
  const std::vector<double> eta = linear_scores(data, beta);
  double value = log_likelihood_from_scores(data, eta);
  if (penalty.norm == PenaltyNorm::L2) {
    for (double b : beta) {
      value -= penalty.lambda * b * b;
    }
  }
  return value;
}

std::vector<double> smooth_gradient(const LabeledDataset& data, std::span<const double> beta,
                                    const PenaltyConfig& penalty) {
  const std::vector<double> eta = linear_scores(data, beta);
  std::vector<double> grad(beta.size(), 0.0);
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    const double residual = static_cast<double>(data.y[i]) - logistic(eta[i]);
    const auto row = data.x.row(i);
    for (std::size_t j = 0; j < grad.size(); ++j) {
      grad[j] += row[j] * residual;
    }
  }
  if (penalty.norm == PenaltyNorm::L2) {
    for (std::size_t j = 0; j < grad.size(); ++j) {
      grad[j] -= 2.0 * penalty.lambda * beta[j];
    }
  }
  return grad;
}

}  // namespace featimp::linear
