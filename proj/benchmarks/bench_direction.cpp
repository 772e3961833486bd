#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "seng/curvature.hpp"
#include "seng/direction.hpp"

using namespace seng;

static void BM_SmwExact(benchmark::State& state) {
    const int n = int(state.range(0)), rho = 32;
    const Matrix u = bench::random_matrix(n, rho, 31);
    const std::vector<double> g = bench::random_vector(n, 32);
    for (auto _ : state) benchmark::DoNotOptimize(direction::smw_exact(u, g, 0.1));
}
BENCHMARK(BM_SmwExact)->Arg(1 << 12)->Arg(1 << 15)->Arg(1 << 17);

static void BM_ExplicitSketched(benchmark::State& state) {
    const int n = 1 << 15, rho = 32;
    const int q = int(state.range(0));
    auto factors = bench::random_factors(rho, 128, n / 128, 16, 33);
    const curvature::CurvatureBlock block =
        curvature::route_and_refresh({}, factors, 0, 1, 1L << 40, 16);
    const std::vector<double> g = bench::random_vector(n, 34);
    direction::SketchPlan plan;
    plan.q = q;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        plan.seed = ++seed;
        benchmark::DoNotOptimize(direction::layer_direction(block, g, 0.1, plan));
    }
}
BENCHMARK(BM_ExplicitSketched)->Arg(1 << 10)->Arg(1 << 12)->Arg(1 << 15);

static void BM_ImplicitDirection(benchmark::State& state) {
    const int rho = 32;
    auto factors = bench::random_factors(rho, 128, 1152, 64, 35);
    const curvature::CurvatureBlock block = curvature::route_and_refresh({}, factors, 0, 1, 1, 8);
    const std::vector<double> g = bench::random_vector(int(block.n()), 36);
    direction::SketchPlan plan;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        plan.seed = ++seed;
        benchmark::DoNotOptimize(direction::layer_direction(block, g, 0.1, plan));
    }
}
BENCHMARK(BM_ImplicitDirection);
