#include <random>

#include <benchmark/benchmark.h>

#include "magmap/data.hpp"
#include "magmap/dski.hpp"
#include "magmap/krylov.hpp"

using namespace magmap;

namespace {

const Hyperparameters kHallway{0.5, 0.04, 1e-4};

InducingGrid hallway_grid() {
  return build_grid({Interval{-34, 34}, Interval{-5.25, 5.25}, Interval{0.2, 1.8}}, {200, 40, 4}, {2, 2, 1});
}

Points hallway_points(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(-34, 34), y(-5.25, 5.25), z(0.2, 1.8);
  Points p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) << x(rng), y(rng), z(rng);
  return p;
}

Eigen::VectorXd noise(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (auto& e : v) e = g(rng);
  return v;
}

void BM_KronMvm(benchmark::State& state) {
  const auto m = static_cast<int>(state.range(0));
  const auto grid = build_grid({Interval{0, 10}, Interval{0, 10}, Interval{0, 1}}, {m, m, 4}, {2, 2, 1});
  const auto k = kron_kuu(grid, kHallway);
  const Eigen::VectorXd v = noise(grid.size(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(kron_mvm(k, v));
  state.SetComplexityN(grid.size());
}
BENCHMARK(BM_KronMvm)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_BuildDW(benchmark::State& state) {
  const auto grid = hallway_grid();
  const Points p = hallway_points(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(build_dW(grid, p));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildDW)->RangeMultiplier(2)->Range(5000, 40000)->Complexity(benchmark::oN);

// One application of dW K dW^T + sigma^2 I; linear in N on a fixed grid.
void BM_ApplyA(benchmark::State& state) {
  const auto grid = hallway_grid();
  const auto dw = build_dW(grid, hallway_points(state.range(0), 3));
  const auto k = kron_kuu(grid, kHallway);
  const AOperator a(dw, k, kHallway.noise_variance);
  const Eigen::VectorXd v = noise(a.size(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(a.apply(v));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ApplyA)->RangeMultiplier(2)->Range(5000, 40000)->Complexity(benchmark::oN)->Unit(benchmark::kMillisecond);

struct FittedFixture {
  FittedMap map;
  Points queries;
};

const FittedFixture& fitted() {
  static const FittedFixture f = [] {
    const Points p = hallway_points(10000, 5);
    const TrainingSet train = make_training_set(p, draw_spectral_prior(p, kHallway, 6, 512).observed);
    FitOptions o;
    o.lanczos_steps = 50;
    return FittedFixture{fit_dski(train, hallway_grid(), kHallway, o), hallway_points(1024, 7)};
  }();
  return f;
}

void BM_PredictMean(benchmark::State& state) {
  const auto& f = fitted();
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.map.predict_mean(f.queries.row(i).transpose()));
    i = (i + 1) % f.queries.rows();
  }
}
BENCHMARK(BM_PredictMean);

void BM_PredictVariance(benchmark::State& state) {
  const auto& f = fitted();
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.map.predict_variance(f.queries.row(i).transpose()));
    i = (i + 1) % f.queries.rows();
  }
}
BENCHMARK(BM_PredictVariance);

}  // namespace

BENCHMARK_MAIN();
