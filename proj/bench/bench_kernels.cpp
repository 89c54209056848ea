// Serial reference vs OpenMP kernels on convection-diffusion sized inputs.
//
//   bench_kernels [--benchmark_filter=...]    (OMP_NUM_THREADS sets the thread count)

#include "lrk/kernels.hpp"
#include "lrk/kronop.hpp"
#include "lrk/problems.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace lrk;

namespace {

Matrix gaussian(Index r, Index c, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d;
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i) m(i, j) = d(gen);
    return m;
}

const ConvDiffProblem& problem(int n) {
    static std::vector<std::pair<int, ConvDiffProblem>> cache;
    for (const auto& [k, p] : cache)
        if (k == n) return p;
    cache.emplace_back(n, gen_convdiff(n, 0.5));
    return cache.back().second;
}

template <bool Omp>
void BM_stacked_products(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Index rank = state.range(1);
    const auto& op = problem(n).op;
    const Matrix x = gaussian(n, rank, 1);
    Matrix out;
    for (auto _ : state) {
        if constexpr (Omp) kernels::stacked_products_omp(op.a_factors(), x, false, out);
        else kernels::stacked_products_serial(op.a_factors(), x, false, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.counters["threads"] = Omp ? kernels::max_threads() : 1;
}

template <bool Omp>
void BM_batched_inner(benchmark::State& state) {
    const Index n = state.range(0);
    const Index rank = state.range(1);
    std::vector<LowRankMatrix> basis;
    for (int j = 0; j < 30; ++j) basis.emplace_back(gaussian(n, rank, 10 + j), gaussian(n, rank, 100 + j));
    const LowRankMatrix w(gaussian(n, rank, 2), gaussian(n, rank, 3));
    for (auto _ : state) {
        Vector v = Omp ? kernels::batched_inner_omp(basis, w) : kernels::batched_inner_serial(basis, w);
        benchmark::DoNotOptimize(v.data());
    }
    state.counters["threads"] = Omp ? kernels::max_threads() : 1;
}

template <bool Omp>
void BM_apply(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Index rank = state.range(1);
    const auto& op = problem(n).op;
    const LowRankMatrix x(gaussian(n, rank, 4), gaussian(n, rank, 5));
    for (auto _ : state) {
        LowRankMatrix y = Omp ? apply(op, x) : apply_serial(op, x, false);
        benchmark::DoNotOptimize(y.left().data());
    }
    state.counters["threads"] = Omp ? kernels::max_threads() : 1;
}

void sizes(benchmark::internal::Benchmark* b) {
    for (int n : {200, 1000, 5000})
        for (int r : {10, 60}) b->Args({n, r});
}

}  // namespace

BENCHMARK(BM_stacked_products<false>)->Name("stacked_products/serial")->Apply(sizes)->UseRealTime();
BENCHMARK(BM_stacked_products<true>)->Name("stacked_products/omp")->Apply(sizes)->UseRealTime();
BENCHMARK(BM_batched_inner<false>)->Name("batched_inner/serial")->Apply(sizes)->UseRealTime();
BENCHMARK(BM_batched_inner<true>)->Name("batched_inner/omp")->Apply(sizes)->UseRealTime();
BENCHMARK(BM_apply<false>)->Name("apply/serial")->Apply(sizes)->UseRealTime();
BENCHMARK(BM_apply<true>)->Name("apply/omp")->Apply(sizes)->UseRealTime();

BENCHMARK_MAIN();
