#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "seng/sketch.hpp"

using namespace seng;

static void BM_BuildSketchUniform(benchmark::State& state) {
    const int n = int(state.range(0));
    const int q = n / 8;
    sketch::SketchSpec spec;
    spec.q = q;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        spec.seed = ++seed;
        benchmark::DoNotOptimize(sketch::build_sketch(spec, {}, n));
    }
}
BENCHMARK(BM_BuildSketchUniform)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

static void BM_BuildSketchLeverage(benchmark::State& state) {
    const int n = int(state.range(0));
    const Matrix u = bench::random_matrix(n, 16, 1);
    const std::vector<double> probs = sketch::leverage_probs(u);
    sketch::SketchSpec spec;
    spec.kind = sketch::SketchKind::Leverage;
    spec.q = n / 8;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        spec.seed = ++seed;
        benchmark::DoNotOptimize(sketch::build_sketch(spec, probs, n));
    }
}
BENCHMARK(BM_BuildSketchLeverage)->Arg(1 << 12)->Arg(1 << 16);

static void BM_ApplySketch(benchmark::State& state) {
    const int n = int(state.range(0));
    const int rho = 32;
    const Matrix u = bench::random_matrix(n, rho, 2);
    sketch::SketchSpec spec;
    spec.q = n / 8;
    spec.seed = 3;
    const sketch::SketchOperator op = sketch::build_sketch(spec, {}, n);
    for (auto _ : state) benchmark::DoNotOptimize(apply_sketch(op, u));
    state.SetItemsProcessed(state.iterations() * op.q() * rho);
}
BENCHMARK(BM_ApplySketch)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
