// Microbenchmarks for the three divergence evaluators and the incremental
// sort cache, on dense two-blob data where the approximations matter most.

#include <benchmark/benchmark.h>

#include "melc/approx.hpp"
#include "melc/optimize.hpp"
#include "melc/potential.hpp"
#include "melc/rng.hpp"

namespace {

using melc::ApproxConfig;
using melc::EvalMode;
using melc::KdeParams;
using melc::LabeledDataset;
using melc::PointMatrix;
using melc::Vec;

LabeledDataset blobs(std::uint64_t seed, std::size_t n, std::size_t d,
                     double sep) {
    melc::rng::Sampler s(seed);
    const Vec dir = s.unit_vector(d);
    PointMatrix neg(n, d), pos(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            neg.at(i, k) = -0.5 * sep * dir[k] + s.gaussian();
            pos.at(i, k) = 0.5 * sep * dir[k] + s.gaussian();
        }
    return LabeledDataset(std::move(neg), std::move(pos));
}

void bench_dcs(benchmark::State& state, EvalMode mode, double eps) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const LabeledDataset ds = blobs(42, n, 4, 1.0);
    melc::rng::Sampler s(7);
    const Vec v = s.unit_vector(4);
    const ApproxConfig cfg{mode, eps};
    melc::SortCache cache;
    long long exp_calls = 0;
    for (auto _ : state) {
        const auto r = melc::dcs_evaluate(ds, v, KdeParams{1.0}, cfg, &cache);
        exp_calls = r.stats.exp_calls;
        benchmark::DoNotOptimize(r.value);
    }
    state.counters["exp_calls"] = static_cast<double>(exp_calls);
}

void BM_DcsExact(benchmark::State& state) {
    bench_dcs(state, EvalMode::exact, 0.0);
}
void BM_DcsDiscard(benchmark::State& state) {
    bench_dcs(state, EvalMode::discard, 0.05);
}
void BM_DcsBin(benchmark::State& state) { bench_dcs(state, EvalMode::bin, 0.05); }

BENCHMARK(BM_DcsExact)->Arg(100)->Arg(500)->Arg(1000);
BENCHMARK(BM_DcsDiscard)->Arg(100)->Arg(500)->Arg(1000);
BENCHMARK(BM_DcsBin)->Arg(100)->Arg(500)->Arg(1000);

void BM_SortCacheUpdate(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    melc::rng::Sampler s(11);
    Vec proj(n);
    for (double& x : proj) x = s.gaussian();
    melc::ClassOrder order = melc::make_order(proj);
    for (auto _ : state) {
        for (double& x : proj) x += 1e-3 * s.gaussian();  // optimizer-step drift
        melc::sort_cache_update(order, proj);
        benchmark::DoNotOptimize(order.perm.data());
    }
}
BENCHMARK(BM_SortCacheUpdate)->Arg(1000)->Arg(10000);

void BM_TrainBlobs(benchmark::State& state) {
    const auto mode = static_cast<EvalMode>(state.range(0));
    const LabeledDataset ds = blobs(99, 200, 3, 2.0);
    const ApproxConfig approx{mode, 0.05};
    for (auto _ : state) {
        melc::ObjectiveHandle obj = melc::penalized_objective(
            melc::make_dcs_objective(ds, KdeParams{1.0}, approx));
        auto cfg = melc::OptimizerConfig::for_method(melc::OptMethod::cg);
        cfg.max_iterations = 50;
        const auto r = melc::optimize(obj, melc::draw_starts(5, 3, 1)[0], cfg);
        benchmark::DoNotOptimize(r.value_final);
    }
}
BENCHMARK(BM_TrainBlobs)
    ->Arg(static_cast<int>(EvalMode::exact))
    ->Arg(static_cast<int>(EvalMode::discard))
    ->Arg(static_cast<int>(EvalMode::bin));

}  // namespace

BENCHMARK_MAIN();
