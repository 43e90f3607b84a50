#include <benchmark/benchmark.h>

#include <random>

#include "ibkd/evalsuite.hpp"
#include "ibkd/kernels.hpp"
#include "ibkd/linalg.hpp"
#include "ibkd/reference.hpp"

using namespace ibkd;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

void BM_MatmulParallel(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : st) benchmark::DoNotOptimize(linalg::matmul(a, b));
}

void BM_MatmulSerial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : st) benchmark::DoNotOptimize(serial::matmul(a, b));
}

void BM_GramParallel(benchmark::State& st) {
  const Matrix x = random_matrix(static_cast<std::size_t>(st.range(0)), 64, 3);
  const auto k = kernels::KernelSpec::rbf(0.5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gram(k, x));
}

void BM_GramSerial(benchmark::State& st) {
  const Matrix x = random_matrix(static_cast<std::size_t>(st.range(0)), 64, 3);
  const auto k = kernels::KernelSpec::rbf(0.5);
  for (auto _ : st) benchmark::DoNotOptimize(serial::gram(k, x));
}

void BM_CenterParallel(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix k = kernels::gram(kernels::KernelSpec::rbf(0.5), random_matrix(n, 8, 4));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::center(k));
}

void BM_CenterSerial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix k = kernels::gram(kernels::KernelSpec::rbf(0.5), random_matrix(n, 8, 4));
  for (auto _ : st) benchmark::DoNotOptimize(serial::center_explicit(k));
}

void BM_RetrieveParallel(benchmark::State& st) {
  const Matrix q = random_matrix(200, 32, 5), d = random_matrix(static_cast<std::size_t>(st.range(0)), 32, 6);
  for (auto _ : st) benchmark::DoNotOptimize(eval::exact_retrieve(q, d, 10, eval::Score::Dot));
}

void BM_RetrieveSerial(benchmark::State& st) {
  const Matrix q = random_matrix(200, 32, 5), d = random_matrix(static_cast<std::size_t>(st.range(0)), 32, 6);
  for (auto _ : st) benchmark::DoNotOptimize(serial::exact_retrieve(q, d, 10, eval::Score::Dot));
}

}  // namespace

BENCHMARK(BM_MatmulParallel)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatmulSerial)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramParallel)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramSerial)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CenterParallel)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CenterSerial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RetrieveParallel)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RetrieveSerial)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
