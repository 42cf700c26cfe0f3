// Serial reference vs OpenMP kernels.
#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "cfuse/kernels.hpp"
#include "cfuse/rct_infer.hpp"
#include "cfuse/sim_lab.hpp"

namespace {

cfuse::RctDesign make_design(std::size_t n)
{
    cfuse::SeededRng rng(7, 0);
    std::vector<cfuse::RctUnit> units;
    for (std::size_t i = 0; i < n; ++i) {
        cfuse::RctUnit u;
        u.id = "r" + std::to_string(i);
        u.z = rng.bernoulli(0.5) ? 1 : 0;
        u.y = rng.normal() + (u.z ? 1.0 : 0.0);
        u.theta = 0.5;
        u.copies = 1 + static_cast<int>(rng.below(3));
        units.push_back(u);
    }
    return cfuse::RctDesign(std::move(units), cfuse::RctScheme::kComplete);
}

void BM_NullStatsSerial(benchmark::State& state)
{
    auto const design = make_design(static_cast<std::size_t>(state.range(0)));
    cfuse::SeededRng const rng(11, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cfuse::null_stats_serial(design, rng, 10000));
    }
}

void BM_NullStatsParallel(benchmark::State& state)
{
    auto const design = make_design(static_cast<std::size_t>(state.range(0)));
    cfuse::SeededRng const rng(11, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cfuse::null_stats_parallel(design, rng, 10000));
    }
}

// A curve roughly as costly as one envelope evaluation.
double heavy(double b)
{
    double s = 0.0;
    for (int j = 0; j < 2000; ++j) {
        s += std::erfc(std::abs(b - 0.001 * j));
    }
    return s;
}

std::vector<double> curve_grid()
{
    std::vector<double> x(401);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = -4.0 + 8.0 * static_cast<double>(i) / 400.0;
    }
    return x;
}

void BM_EvalCurveSerial(benchmark::State& state)
{
    auto const x = curve_grid();
    std::vector<double> out;
    for (auto _ : state) {
        cfuse::eval_curve_serial(heavy, x, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_EvalCurveParallel(benchmark::State& state)
{
    auto const x = curve_grid();
    std::vector<double> out;
    for (auto _ : state) {
        cfuse::eval_curve_parallel(heavy, x, out);
        benchmark::DoNotOptimize(out.data());
    }
}

cfuse::ScenarioSpec small_scenario()
{
    cfuse::ScenarioSpec s;
    s.n_total = 300;
    s.replications = 8;
    s.mc_samples = 1000;
    return s;
}

void BM_ReplicationsSerial(benchmark::State& state)
{
    auto const spec = small_scenario();
    for (auto _ : state) {
        benchmark::DoNotOptimize(cfuse::run_replications_serial(spec));
    }
}

void BM_ReplicationsParallel(benchmark::State& state)
{
    auto const spec = small_scenario();
    for (auto _ : state) {
        benchmark::DoNotOptimize(cfuse::run_replications_parallel(spec));
    }
}

}  // namespace

BENCHMARK(BM_NullStatsSerial)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NullStatsParallel)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvalCurveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvalCurveParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicationsSerial)->Unit(benchmark::kMillisecond)->Iterations(2);
BENCHMARK(BM_ReplicationsParallel)->Unit(benchmark::kMillisecond)->Iterations(2);

BENCHMARK_MAIN();
