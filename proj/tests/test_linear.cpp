#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "featimp/linear.hpp"
#include "featimp/preprocess.hpp"
#include "featimp/rng.hpp"
#include "featimp/stats.hpp"
#include "test_util.hpp"

using namespace featimp;
using linear::PenaltyConfig;
using linear::PenaltyNorm;

namespace {

LabeledDataset standardized_random_dataset(std::size_t n, std::size_t d, std::uint64_t seed,
                                           double signal = 1.0) {
  rng::Rng rng(seed);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      rows[i][j] = rng.normal();
      eta += (j == 0 ? signal : 0.0) * rows[i][j];
    }
    y[i] = rng.uniform01() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
  }
  LabeledDataset data = testutil::make_dataset(rows, y);
  data.require_both_classes("test data");
  auto [std_x, stats] = standardize(data.x);
  data.x = std::move(std_x);
  return data;
}

/// Coordinate-wise golden-section ascent on the penalized objective;
/// derivative-free, run to high precision. Independent of the Newton/CD path.
std::vector<double> golden_section_oracle(const LabeledDataset& data,
                                          const PenaltyConfig& penalty, std::size_t d) {
  std::vector<double> beta(d, 0.0);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int round = 0; round < 200; ++round) {
    for (std::size_t j = 0; j < d; ++j) {
      double lo = beta[j] - 4.0;
      double hi = beta[j] + 4.0;
      const auto value_at = [&](double v) {
        std::vector<double> candidate = beta;
        candidate[j] = v;
        return linear::penalized_objective(data, candidate, penalty);
      };
      double x1 = hi - phi * (hi - lo);
      double x2 = lo + phi * (hi - lo);
      double f1 = value_at(x1);
      double f2 = value_at(x2);
      for (int it = 0; it < 120; ++it) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + phi * (hi - lo);
          f2 = value_at(x2);
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - phi * (hi - lo);
          f1 = value_at(x1);
        }
      }
      beta[j] = 0.5 * (lo + hi);
    }
  }
  return beta;
}

}  // namespace

TEST_CASE("huge L1 penalty zeroes every coefficient") {
  const LabeledDataset data = standardized_random_dataset(40, 3, 11);
  double max_grad = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    double g = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
      g += data.x.at(i, j) * (static_cast<double>(data.y[i]) - 0.5);
    }
    max_grad = std::max(max_grad, std::fabs(g));
  }
  const PenaltyConfig penalty{PenaltyNorm::L1, static_cast<double>(data.n_rows()) * max_grad};
  const auto model = linear::fit_logistic(data, penalty);
  CHECK(model.converged);
  for (double b : model.beta) {
    CHECK(b == 0.0);
  }
  for (double p : linear::predict_proba(model, data.x)) {
    CHECK(p == 0.5);
  }
}

TEST_CASE("gradient at zero equals sum of x * (y - 1/2)") {
  const LabeledDataset data = standardized_random_dataset(25, 4, 3);
  const std::vector<double> zero(4, 0.0);
  const auto grad = linear::smooth_gradient(data, zero, {PenaltyNorm::L1, 0.7});
  for (std::size_t j = 0; j < 4; ++j) {
    double expected = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
      expected += data.x.at(i, j) * (static_cast<double>(data.y[i]) - 0.5);
    }
    CHECK(grad[j] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("L2 fit matches a derivative-free optimizer oracle") {
  // Fixed toy dataset: N=8, d=2, standardized.
  std::vector<std::vector<double>> rows{{1.2, -0.4}, {-0.7, 0.9},  {0.3, 1.5},  {-1.6, -0.2},
                                        {0.9, -1.1}, {-0.2, 0.5}, {1.4, 0.8},  {-1.3, -2.0}};
  std::vector<int> y{1, 0, 1, 0, 1, 1, 1, 0};
  LabeledDataset data = testutil::make_dataset(rows, y);
  data.x = standardize(data.x).first;

  const PenaltyConfig penalty{PenaltyNorm::L2, 1.0};
  const auto model = linear::fit_logistic(data, penalty);
  CHECK(model.converged);

  const auto oracle = golden_section_oracle(data, penalty, 2);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::fabs(model.beta[j] - oracle[j]) < 1e-4);
  }
}

TEST_CASE("L1 fit matches the oracle on the nonsmooth objective") {
  const LabeledDataset data = standardized_random_dataset(30, 2, 19, 1.5);
  const PenaltyConfig penalty{PenaltyNorm::L1, 2.0};
  const auto model = linear::fit_logistic(data, penalty);
  const auto oracle = golden_section_oracle(data, penalty, 2);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::fabs(model.beta[j] - oracle[j]) < 1e-4);
  }
}

TEST_CASE("prediction follows the logistic function") {
  linear::LinearModel model;
  model.beta = {0.0, 0.0};
  FeatureMatrix x(1, 2);
  x.at(0, 0) = 3.0;
  x.at(0, 1) = -2.0;
  CHECK(linear::predict_proba(model, x)[0] == 0.5);

  model.beta = {std::log(3.0), 0.0};
  FeatureMatrix unit(1, 2);
  unit.at(0, 0) = 1.0;
  unit.at(0, 1) = 5.0;
  CHECK(linear::predict_proba(model, unit)[0] == doctest::Approx(0.75).epsilon(1e-12));

  FeatureMatrix wrong(1, 3);
  CHECK_THROWS_AS(linear::predict_proba(model, wrong), ValidationError);
}

TEST_CASE("probabilities of x and -x sum to one") {
  rng::Rng rng(8);
  linear::LinearModel model;
  model.beta = {0.8, -1.7, 0.3};
  FeatureMatrix x(10, 3);
  FeatureMatrix negated(10, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      x.at(i, j) = rng.normal();
      negated.at(i, j) = -x.at(i, j);
    }
  }
  const auto p = linear::predict_proba(model, x);
  const auto q = linear::predict_proba(model, negated);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(p[i] + q[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("coefficient importance is the magnitude") {
  linear::LinearModel model;
  model.beta = {-2.0, 1.0};
  std::vector<FeatureMeta> meta{{"a", FeatureKind::Continuous, 0, "", false},
                                {"b", FeatureKind::Continuous, 0, "", false}};
  const auto report = linear::coefficient_importance(model, meta);
  CHECK(report.scores == std::vector<double>{2.0, 1.0});
  CHECK(report.method == ImportanceMethod::Coefficient);

  model.beta = {0.0, 0.0};
  const auto zero = linear::coefficient_importance(model, meta);
  CHECK(zero.scores == std::vector<double>{0.0, 0.0});

  // argmax is invariant to sign flips.
  model.beta = {2.0, 1.0};
  const auto flipped = linear::coefficient_importance(model, meta);
  CHECK(flipped.scores == std::vector<double>{2.0, 1.0});
}

TEST_CASE("fit rejects non-standardized input") {
  std::vector<std::vector<double>> rows{{10.0}, {11.0}, {12.0}, {13.0}};
  LabeledDataset data = testutil::make_dataset(rows, {0, 1, 0, 1});
  CHECK_THROWS_AS(linear::fit_logistic(data, {PenaltyNorm::L2, 0.1}), ValidationError);
}

TEST_CASE("univariate screen zeroes constant features") {
  LabeledDataset data = standardized_random_dataset(30, 2, 23);
  // Standardization maps a constant column to all zeros.
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    data.x.at(i, 1) = 0.0;
  }
  const auto report = linear::univariate_screen(data);
  CHECK(report.scores[1] == 0.0);
  const auto fits = linear::univariate_fits(data, 0.05);
  CHECK(fits[1].p_value == 1.0);
  CHECK_FALSE(fits[1].significant);
}

TEST_CASE("alpha threshold keeps p below and zeroes p above") {
  const LabeledDataset data = standardized_random_dataset(60, 1, 29, 0.6);
  const auto fits = linear::univariate_fits(data, 0.05);
  const double p = fits[0].p_value;
  REQUIRE(p > 0.0);
  REQUIRE(p < 1.0);

  // Same data, alpha straddling the observed p: kept iff p < alpha.
  const auto kept = linear::univariate_screen(data, p * 1.01);
  CHECK(kept.scores[0] == doctest::Approx(std::fabs(fits[0].beta_hat)));
  const auto zeroed = linear::univariate_screen(data, p * 0.99);
  CHECK(zeroed.scores[0] == 0.0);
}

TEST_CASE("univariate fit matches a grid-search oracle with analytic Wald p") {
  // Hand-built N=20 dataset: feature is a label-correlated coin.
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const int label = i < 10 ? 1 : 0;
    // 8 of 10 positives carry +1, 7 of 10 negatives carry -1.
    const double value = (label == 1) ? (i < 8 ? 1.0 : -1.0) : (i < 17 ? -1.0 : 1.0);
    rows.push_back({value});
    y.push_back(label);
  }
  LabeledDataset data = testutil::make_dataset(rows, y);
  data.x = standardize(data.x).first;

  const auto fits = linear::univariate_fits(data, 0.05);

  // Oracle: dense grid refined around the log-likelihood maximum.
  const auto loglik = [&](double b) {
    double ll = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
      const double eta = b * data.x.at(i, 0);
      ll += static_cast<double>(data.y[i]) * eta - std::log1p(std::exp(eta));
    }
    return ll;
  };
  double lo = -20.0;
  double hi = 20.0;
  for (int refine = 0; refine < 12; ++refine) {
    double best_b = lo;
    double best_v = loglik(lo);
    const double step = (hi - lo) / 400.0;
    for (int k = 1; k <= 400; ++k) {
      const double b = lo + step * static_cast<double>(k);
      const double v = loglik(b);
      if (v > best_v) {
        best_v = v;
        best_b = b;
      }
    }
    lo = best_b - step;
    hi = best_b + step;
  }
  const double beta_oracle = 0.5 * (lo + hi);
  CHECK(std::fabs(fits[0].beta_hat - beta_oracle) < 1e-4);

  // Analytic information matrix at the oracle beta.
  double info = 0.0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    const double eta = beta_oracle * data.x.at(i, 0);
    const double p = 1.0 / (1.0 + std::exp(-eta));
    info += data.x.at(i, 0) * data.x.at(i, 0) * p * (1.0 - p);
  }
  const double z = beta_oracle * std::sqrt(info);
  const double p_oracle = 2.0 * (1.0 - stats::normal_cdf(std::fabs(z)));
  CHECK(std::fabs(fits[0].p_value - p_oracle) < 1e-3);
}

TEST_CASE("perfect separation is flagged with p = 0") {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({i < 10 ? 1.0 : -1.0});
    y.push_back(i < 10 ? 1 : 0);
  }
  LabeledDataset data = testutil::make_dataset(rows, y);
  data.x = standardize(data.x).first;
  const auto fits = linear::univariate_fits(data, 0.05);
  CHECK(fits[0].separation);
  CHECK(fits[0].p_value == 0.0);
  CHECK(fits[0].significant);
}

TEST_CASE("analytic gradient matches central finite differences") {
  rng::Rng rng(1234);
  const LabeledDataset data = standardized_random_dataset(60, 8, 47);
  const PenaltyConfig penalties[] = {{PenaltyNorm::L2, 0.5}, {PenaltyNorm::L1, 0.5}};
  for (const auto& penalty : penalties) {
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> beta(8);
      for (auto& b : beta) {
        b = rng.normal();
      }
      const auto grad = linear::smooth_gradient(data, beta, penalty);
      const double h = 1e-5;
      for (std::size_t j = 0; j < beta.size(); ++j) {
        std::vector<double> plus = beta;
        std::vector<double> minus = beta;
        plus[j] += h;
        minus[j] -= h;
        const double fd = (linear::smooth_objective(data, plus, penalty) -
                           linear::smooth_objective(data, minus, penalty)) /
                          (2.0 * h);
        const double scale = std::max({std::fabs(grad[j]), std::fabs(fd), 1e-8});
        CHECK(std::fabs(grad[j] - fd) / scale <= 1e-5);
      }
    }
  }
}

TEST_CASE("L2 norm shrinks and L1 sparsity grows along the lambda path") {
  const LabeledDataset data = standardized_random_dataset(80, 5, 31, 1.2);
  const double lambdas[] = {0.0001, 0.001, 0.01, 0.1, 1.0, 10.0};

  double previous_norm = std::numeric_limits<double>::infinity();
  for (double lambda : lambdas) {
    const auto model = linear::fit_logistic(data, {PenaltyNorm::L2, lambda});
    double norm = 0.0;
    for (double b : model.beta) {
      norm += b * b;
    }
    norm = std::sqrt(norm);
    CHECK(norm <= previous_norm + 1e-9);
    previous_norm = norm;
  }

  int previous_zeros = -1;
  for (double lambda : lambdas) {
    const auto model = linear::fit_logistic(data, {PenaltyNorm::L1, lambda});
    int zeros = 0;
    for (double b : model.beta) {
      zeros += b == 0.0 ? 1 : 0;
    }
    CHECK(zeros >= previous_zeros);
    previous_zeros = zeros;
  }
}

TEST_CASE("returned beta beats beta = 0 on the penalized objective") {
  const LabeledDataset data = standardized_random_dataset(50, 4, 61, 1.0);
  for (const auto& penalty :
       {PenaltyConfig{PenaltyNorm::L2, 0.3}, PenaltyConfig{PenaltyNorm::L1, 0.3}}) {
    const auto model = linear::fit_logistic(data, penalty);
    const std::vector<double> zero(4, 0.0);
    CHECK(linear::penalized_objective(data, model.beta, penalty) >=
          linear::penalized_objective(data, zero, penalty) - 1e-12);
  }
}
