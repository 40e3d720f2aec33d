#pragma once

#include <span>
#include <vector>

#include "featimp/importance.hpp"
#include "featimp/matrix.hpp"

namespace featimp::linear {

enum class PenaltyNorm { L1, L2 };

std::string to_string(PenaltyNorm norm);
PenaltyNorm penalty_norm_from_string(const std::string& s);

struct PenaltyConfig {
  PenaltyNorm norm = PenaltyNorm::L2;
  double lambda = 0.0;
};

/// Zero-intercept logistic model over standardized predictors.
struct LinearModel {
  std::vector<double> beta;
  PenaltyConfig penalty;
  bool converged = false;
  int n_iterations = 0;
};

/// Maximizes sum_i [y_i eta_i - log(1 + exp(eta_i))] minus the penalty
/// (lambda * sum beta_j^2 for L2, lambda * sum |beta_j| for L1).
/// L2 uses damped Newton to gradient norm < 1e-8; L1 uses cyclic coordinate
/// descent with quadratic majorization to coefficient change < 1e-8.
/// Requires standardized input: any column mean beyond 1e-6 is rejected.
LinearModel fit_logistic(const LabeledDataset& train, const PenaltyConfig& penalty);

/// p_i = 1 / (1 + exp(-beta . x_i)).
std::vector<double> predict_proba(const LinearModel& model, const FeatureMatrix& x);

/// score_j = |beta_j|.
ImportanceReport coefficient_importance(const LinearModel& model,
                                        std::span<const FeatureMeta> meta);

struct UnivariateResult {
  double beta_hat = 0.0;
  double p_value = 1.0;
  bool significant = false;
  bool separation = false;
};

/// One zero-intercept single-predictor fit per feature with a Wald z-test.
/// Perfectly separating features are flagged and assigned p = 0; constant
/// features get beta 0 and p 1.
std::vector<UnivariateResult> univariate_fits(const LabeledDataset& train, double alpha = 0.05);

/// score_j = |beta_hat_j| when p_j < alpha, else 0.
ImportanceReport univariate_screen(const LabeledDataset& train, double alpha = 0.05);

/// Value of the full penalized objective at beta.
double penalized_objective(const LabeledDataset& data, std::span<const double> beta,
                           const PenaltyConfig& penalty);

/// Value/gradient of the smooth part: the log-likelihood, plus the ridge term
/// when the penalty is L2 (the L1 term is non-smooth and excluded).
double smooth_objective(const LabeledDataset& data, std::span<const double> beta,
                        const PenaltyConfig& penalty);
std::vector<double> smooth_gradient(const LabeledDataset& data, std::span<const double> beta,
                                    const PenaltyConfig& penalty);

}  // namespace featimp::linear
