// Serial reference vs OpenMP kernels on the shapes the model actually runs:
// per-example token blocks, batched location encoding and grid scoring.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fsr/geo.hpp"
#include "fsr/kernels.hpp"
#include "fsr/model.hpp"

namespace {

std::vector<float> random_matrix(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_GemmNN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 256;
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const auto a = random_matrix(m * k, 1);
  const auto b = random_matrix(k * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      fsr::kernels::parallel::gemm_nn(m, n, k, a.data(), b.data(), c.data(), false);
    } else {
      fsr::kernels::serial::gemm_nn(m, n, k, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(
      2.0 * static_cast<double>(m * n * k), benchmark::Counter::kIsIterationInvariantRate,
      benchmark::Counter::kIs1000);
}
BENCHMARK_TEMPLATE(BM_GemmNN, false)->Args({24, 768})->Args({2048, 256});
BENCHMARK_TEMPLATE(BM_GemmNN, true)->Args({24, 768})->Args({2048, 256});

template <bool Parallel>
void BM_SigmoidScores(benchmark::State& state) {
  const auto cells = static_cast<std::size_t>(state.range(0));
  const auto rows = random_matrix(cells * 256, 3);
  const auto w = random_matrix(256, 4);
  std::vector<float> out(cells);
  for (auto _ : state) {
    if constexpr (Parallel) {
      fsr::kernels::parallel::sigmoid_scores<float>(rows, w, out);
    } else {
      fsr::kernels::serial::sigmoid_scores<float>(rows, w, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK_TEMPLATE(BM_SigmoidScores, false)->Arg(5400)->Arg(64800);
BENCHMARK_TEMPLATE(BM_SigmoidScores, true)->Arg(5400)->Arg(64800);

template <bool Parallel>
void BM_NearestDistance(benchmark::State& state) {
  fsr::geo::GridSpec grid{-30, 30, -45, 45, 1.0};
  const auto centers = grid.centers();
  std::vector<double> lat, lon, tlat, tlon;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    lat.push_back(centers[i].lat());
    lon.push_back(centers[i].lon());
    if (i % 17 == 0) {
      tlat.push_back(centers[i].lat());
      tlon.push_back(centers[i].lon());
    }
  }
  std::vector<double> out(lat.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      fsr::kernels::parallel::nearest_distance_km({lat, lon}, {tlat, tlon}, out);
    } else {
      fsr::kernels::serial::nearest_distance_km({lat, lon}, {tlat, tlon}, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK_TEMPLATE(BM_NearestDistance, false);
BENCHMARK_TEMPLATE(BM_NearestDistance, true);

template <bool Parallel>
void BM_EmbedPoints(benchmark::State& state) {
  fsr::model::FsSinrModel<float> model(fsr::model::ModelConfig{}, 1);
  fsr::geo::GridSpec grid{-30, 30, -45, 45, 1.0};
  const auto centers = grid.centers();
  for (auto _ : state) {
    auto f = Parallel ? fsr::model::parallel::embed_points(model.encoder, centers)
                      : fsr::model::serial::embed_points(model.encoder, centers);
    benchmark::DoNotOptimize(f.data());
  }
}
BENCHMARK_TEMPLATE(BM_EmbedPoints, false)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_EmbedPoints, true)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
