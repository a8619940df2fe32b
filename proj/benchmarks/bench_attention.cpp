// Forward-pass timings of the attention aggregators over bag size.

#include <random>

#include <benchmark/benchmark.h>

#include "amdmil/aggregators.hpp"

using namespace amdmil;

namespace {

constexpr std::size_t kDim = 64;

struct Fixture {
    AttentionConfig cfg;
    AggregatorParams params;
    Matrix h;

    explicit Fixture(std::size_t instances) {
        cfg.feature_dim = kDim;
        cfg.agent_count = 8;
        cfg.landmark_count = 8;
        std::mt19937_64 rng(3);
        params = AggregatorParams::init(cfg, 2, rng);
        std::normal_distribution<double> normal(0.0, 1.0);
        h = Matrix(instances + 1, kDim);
        for (double& x : h.data()) x = normal(rng);
    }
};

void BM_Dense(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        const auto qkv = qkv_project(f.h, f.params);
        benchmark::DoNotOptimize(self_attention_dense(qkv.q, qkv.k, qkv.v));
    }
    state.SetComplexityN(state.range(0));
}

void BM_Nystrom(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        const auto qkv = qkv_project(f.h, f.params);
        benchmark::DoNotOptimize(nystrom_attention(qkv.q, qkv.k, qkv.v, f.cfg));
    }
    state.SetComplexityN(state.range(0));
}

void BM_Amd(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(amd_forward(f.h, f.params, f.cfg));
    state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_Dense)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(BM_Nystrom)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(BM_Amd)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond)->Complexity();

BENCHMARK_MAIN();
