// OpenMP kernels against their serial references, plus the end-to-end
// projection fit that dominates an epoch.

#include <benchmark/benchmark.h>

#include <random>

#include "sage/kernels.hpp"
#include "sage/manifold.hpp"

namespace {

sage::EmbeddingMatrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  sage::EmbeddingMatrix m(n, d);
  for (auto& v : m.values()) v = dist(gen);
  return m;
}

sage::Matrix<double> random_dense(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  sage::Matrix<double> m(r, c);
  for (auto& v : m.values()) v = dist(gen);
  return m;
}

void BM_KnnSelf(benchmark::State& state) {
  const auto x = random_points(static_cast<std::size_t>(state.range(0)), 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(sage::kernels::knn_self(x, 15));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_KnnSelfReference(benchmark::State& state) {
  const auto x = random_points(static_cast<std::size_t>(state.range(0)), 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(sage::kernels::reference::knn_self(x, 15));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_KnnQuery(benchmark::State& state) {
  const auto ref = random_points(2000, 32, 2);
  const auto q = random_points(static_cast<std::size_t>(state.range(0)), 32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sage::kernels::knn_query(ref, q, 10));
}

void BM_KnnQueryReference(benchmark::State& state) {
  const auto ref = random_points(2000, 32, 2);
  const auto q = random_points(static_cast<std::size_t>(state.range(0)), 32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sage::kernels::reference::knn_query(ref, q, 10));
}

void BM_Affine(benchmark::State& state) {
  const auto in = random_dense(static_cast<std::size_t>(state.range(0)), 128, 4);
  const auto w = random_dense(128, 128, 5);
  const std::vector<double> bias(128, 0.1);
  sage::Matrix<double> out;
  for (auto _ : state) {
    sage::kernels::affine(in, w, bias, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

void BM_AffineReference(benchmark::State& state) {
  const auto in = random_dense(static_cast<std::size_t>(state.range(0)), 128, 4);
  const auto w = random_dense(128, 128, 5);
  const std::vector<double> bias(128, 0.1);
  sage::Matrix<double> out;
  for (auto _ : state) {
    sage::kernels::reference::affine(in, w, bias, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

void BM_ProjectionFit(benchmark::State& state) {
  const auto x = random_points(static_cast<std::size_t>(state.range(0)), 32, 6);
  sage::manifold::ProjectionParams p;
  p.n_neighbors = 50;
  for (auto _ : state) benchmark::DoNotOptimize(sage::manifold::fit(x, p));
}

}  // namespace

BENCHMARK(BM_KnnSelf)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnSelfReference)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnQuery)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnQueryReference)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Affine)->Arg(256)->Arg(2048)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AffineReference)->Arg(256)->Arg(2048)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ProjectionFit)->Arg(800)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
