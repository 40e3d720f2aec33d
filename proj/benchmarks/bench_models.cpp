#include <benchmark/benchmark.h>

#include "featimp/interpret.hpp"
#include "featimp/rng.hpp"
#include "featimp/synth.hpp"
#include "featimp/trees.hpp"

namespace {

using namespace featimp;

LabeledDataset planted(std::size_t n, std::size_t d, std::uint64_t seed) {
  synth::TabularSpec spec;
  spec.n_samples = n;
  spec.n_features = d;
  spec.planted_beta.assign(d, 0.0);
  spec.planted_beta[0] = 2.0;
  spec.planted_beta[1] = -1.5;
  spec.seed = seed;
  return synth::generate_tabular(spec);
}

void ForestFit(benchmark::State& state) {
  const auto data = planted(static_cast<std::size_t>(state.range(0)), 20, 1);
  trees::ForestConfig config;
  config.n_trees = 50;
  config.seed = 7;
  for (auto _ : state) {
    auto model = trees::fit_random_forest(data, config);
    benchmark::DoNotOptimize(model);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(ForestFit)->RangeMultiplier(2)->Range(250, 2000)->Complexity()->Unit(benchmark::kMillisecond);

void BoostFit(benchmark::State& state) {
  const auto data = planted(static_cast<std::size_t>(state.range(0)), 20, 2);
  trees::BoostConfig config;
  config.n_rounds = 50;
  for (auto _ : state) {
    auto model = trees::fit_gradient_boosting(data, config);
    benchmark::DoNotOptimize(model);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BoostFit)->RangeMultiplier(2)->Range(250, 2000)->Complexity()->Unit(benchmark::kMillisecond);

void ForestPredict(benchmark::State& state) {
  const auto data = planted(1000, 20, 3);
  trees::ForestConfig config;
  config.n_trees = 100;
  config.seed = 7;
  const auto model = trees::fit_random_forest(data, config);
  const auto test = planted(static_cast<std::size_t>(state.range(0)), 20, 4);
  for (auto _ : state) {
    auto probs = trees::predict_proba(model, test.x);
    benchmark::DoNotOptimize(probs);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(ForestPredict)->Range(1000, 8000)->Unit(benchmark::kMillisecond);

void PermutationImportance(benchmark::State& state) {
  const auto train = planted(1000, static_cast<std::size_t>(state.range(0)), 5);
  const auto test = planted(1000, static_cast<std::size_t>(state.range(0)), 6);
  trees::ForestConfig config;
  config.n_trees = 50;
  config.seed = 7;
  const interpret::Predictor model(trees::fit_random_forest(train, config));
  for (auto _ : state) {
    auto report = interpret::permutation_importance(model, test, 11, 1);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(PermutationImportance)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
