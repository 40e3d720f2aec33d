#include <benchmark/benchmark.h>

#include <vector>

#include "featimp/impute.hpp"
#include "featimp/linear.hpp"
#include "featimp/preprocess.hpp"
#include "featimp/rng.hpp"
#include "featimp/stats.hpp"
#include "featimp/synth.hpp"

namespace {

using namespace featimp;

void Auroc(benchmark::State& state) {
  rng::Rng rng(1);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.normal();
    labels[i] = static_cast<int>(rng.uniform_int(2));
  }
  labels[0] = 0;
  labels[1] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::auroc(scores, labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(Auroc)->Range(1000, 64000);

void SoftImpute(benchmark::State& state) {
  rng::Rng rng(2);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 50;
  FeatureMatrix x(n, d);
  std::vector<double> u(n);
  std::vector<double> v(d);
  for (auto& w : u) {
    w = rng.normal();
  }
  for (auto& w : v) {
    w = rng.normal();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      x.at(i, j) = rng.uniform01() < 0.3 ? FeatureMatrix::missing_value()
                                         : 2.0 * u[i] * v[j] + 0.1 * rng.normal();
    }
  }
  impute::SoftImputeConfig config;
  config.shrinkage = 0.1 * impute::initial_singular_scale(x);
  config.max_rank = 10;
  config.max_iterations = 50;
  for (auto _ : state) {
    benchmark::DoNotOptimize(impute::soft_impute(x, config));
  }
}
BENCHMARK(SoftImpute)->Range(100, 800)->Unit(benchmark::kMillisecond);

void LassoCoordinateDescent(benchmark::State& state) {
  synth::TabularSpec spec;
  spec.n_samples = static_cast<std::size_t>(state.range(0));
  spec.n_features = 30;
  spec.planted_beta.assign(30, 0.0);
  spec.planted_beta[0] = 1.5;
  spec.planted_beta[1] = -1.0;
  spec.seed = 3;
  auto data = synth::generate_tabular(spec);
  data.x = standardize(data.x).first;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        linear::fit_logistic(data, {linear::PenaltyNorm::L1, 0.1}));
  }
}
BENCHMARK(LassoCoordinateDescent)->Range(250, 2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
