#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "seng/curvature.hpp"
#include "seng/direction.hpp"

using namespace seng;

namespace {

// conv-style shape: n_G = 128, n_A = 1152, κ = 784 (n = 147,456)
curvature::CurvatureBlock implicit_block(int rho, int rank) {
    auto factors = bench::random_factors(rho, 128, 1152, 64, 7);
    return curvature::route_and_refresh({}, factors, 0, 1, 1, rank);
}

}  // namespace

static void BM_UtzImplicit(benchmark::State& state) {
    const int rho = int(state.range(0));
    const curvature::CurvatureBlock block = implicit_block(rho, 8);
    const std::vector<double> z = bench::random_vector(int(block.n()), 11);
    for (auto _ : state) benchmark::DoNotOptimize(curvature::ut_z(block, z));
}
BENCHMARK(BM_UtzImplicit)->Arg(8)->Arg(32);

static void BM_UtzImplicitSketched(benchmark::State& state) {
    const int rho = int(state.range(0));
    const curvature::CurvatureBlock block = implicit_block(rho, 8);
    const std::vector<double> z = bench::random_vector(int(block.n()), 13);
    direction::SketchPlan plan;
    plan.seed = 5;
    const curvature::FactorSketches sk = direction::make_factor_sketches(block, plan);
    for (auto _ : state) benchmark::DoNotOptimize(curvature::ut_z(block, z, &sk));
}
BENCHMARK(BM_UtzImplicitSketched)->Arg(8)->Arg(32);

static void BM_UtuImplicit(benchmark::State& state) {
    const int rho = int(state.range(0));
    const curvature::CurvatureBlock block = implicit_block(rho, 8);
    for (auto _ : state) benchmark::DoNotOptimize(curvature::utu(block));
}
BENCHMARK(BM_UtuImplicit)->Arg(8)->Arg(32);

static void BM_UtuImplicitSketched(benchmark::State& state) {
    const int rho = int(state.range(0));
    const curvature::CurvatureBlock block = implicit_block(rho, 8);
    direction::SketchPlan plan;
    plan.seed = 6;
    const curvature::FactorSketches sk = direction::make_factor_sketches(block, plan);
    for (auto _ : state) benchmark::DoNotOptimize(curvature::utu(block, &sk));
}
BENCHMARK(BM_UtuImplicitSketched)->Arg(8)->Arg(32);

static void BM_UcExactVsAveraged(benchmark::State& state) {
    const int rho = 32;
    const bool averaged = state.range(0) == 1;
    const curvature::CurvatureBlock block = implicit_block(rho, 8);
    const std::vector<double> c = bench::random_vector(rho, 17);
    const curvature::UcMode mode = averaged ? curvature::UcMode::Averaged
                                            : curvature::UcMode::Exact;
    for (auto _ : state) benchmark::DoNotOptimize(curvature::u_times_c(block, c, mode));
}
BENCHMARK(BM_UcExactVsAveraged)->Arg(0)->Arg(1);

static void BM_RefreshImplicit(benchmark::State& state) {
    const int rho = 8;
    auto factors = bench::random_factors(rho, 128, 1152, 64, 23);
    for (auto _ : state)
        benchmark::DoNotOptimize(curvature::route_and_refresh({}, factors, 0, 1, 1, 8));
}
BENCHMARK(BM_RefreshImplicit);
