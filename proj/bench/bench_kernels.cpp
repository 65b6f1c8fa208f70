#include <benchmark/benchmark.h>

#include "htds/kernels.hpp"
#include "htds/rng.hpp"

namespace {

htds::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  htds::Rng rng(seed);
  htds::Matrix m(r, c);
  for (double& v : m.flat()) v = rng.uniform(-1.0, 1.0);
  return m;
}

void BM_GemmNN_Omp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 64, 1), b = random_matrix(64, 64, 2);
  htds::Matrix c(n, 64);
  for (auto _ : state) {
    htds::kernels::gemm_nn(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_GemmNN_Serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 64, 1), b = random_matrix(64, 64, 2);
  htds::Matrix c(n, 64);
  for (auto _ : state) {
    htds::kernels::serial::gemm_nn(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_SoftmaxRows_Omp(benchmark::State& state) {
  auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 3);
  for (auto _ : state) {
    auto x = m;
    htds::kernels::softmax_rows(x);
    benchmark::DoNotOptimize(x.data());
  }
}

void BM_SoftmaxRows_Serial(benchmark::State& state) {
  auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 3);
  for (auto _ : state) {
    auto x = m;
    htds::kernels::serial::softmax_rows(x);
    benchmark::DoNotOptimize(x.data());
  }
}

}  // namespace

BENCHMARK(BM_GemmNN_Omp)->Arg(128)->Arg(512)->Arg(2048);
BENCHMARK(BM_GemmNN_Serial)->Arg(128)->Arg(512)->Arg(2048);
BENCHMARK(BM_SoftmaxRows_Omp)->Arg(64)->Arg(512);
BENCHMARK(BM_SoftmaxRows_Serial)->Arg(64)->Arg(512);

BENCHMARK_MAIN();
