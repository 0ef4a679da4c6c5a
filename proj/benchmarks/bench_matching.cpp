#include <benchmark/benchmark.h>

#include <cstdint>

#include "skelmatch/matching.hpp"
#include "skelmatch/pooling.hpp"
#include "skelmatch/rng.hpp"
#include "skelmatch/transport.hpp"

namespace {

using namespace skelmatch;

NodeSet random_node_set(int count, int dim, std::uint64_t seed) {
    Rng rng(seed);
    NodeSet set;
    set.dim = dim;
    set.count = count;
    set.data.resize(static_cast<std::size_t>(count) * dim);
    for (double& v : set.data) v = rng.normal();
    return set;
}

FeatureMap random_map(int c, int n, int t, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMap map(c, n, t);
    for (double& v : map.data) v = rng.normal();
    return map;
}

void SolveExact(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const NodeSet x = random_node_set(n, 8, 1);
    const NodeSet y = random_node_set(n, 8, 2);
    const CostMatrix d = cost_matrix(x, y);
    const NodeWeights w = cross_reference_weights(x, y);
    for (auto _ : state) {
        auto plan = solve_exact(d, w.supply, w.demand, n * n);
        benchmark::DoNotOptimize(plan.cost);
    }
    state.SetComplexityN(n);
}
BENCHMARK(SolveExact)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void SolveSinkhorn(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const NodeSet x = random_node_set(n, 8, 1);
    const NodeSet y = random_node_set(n, 8, 2);
    const CostMatrix d = cost_matrix(x, y);
    const NodeWeights w = cross_reference_weights(x, y);
    for (auto _ : state) {
        auto plan = solve_sinkhorn(d, w.supply, w.demand, 0.05, 1e-6, 1000);
        benchmark::DoNotOptimize(plan.cost);
    }
    state.SetComplexityN(n);
}
BENCHMARK(SolveSinkhorn)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void CombinedMC(benchmark::State& state) {
    const ScalePyramid a = build_pyramid(random_map(3, 25, 32, 10));
    const ScalePyramid b = build_pyramid(random_map(3, 25, 32, 11));
    MatchOptions options;
    options.strategy = Strategy::kMC;
    for (auto _ : state) {
        auto score = combined(a, b, options);
        benchmark::DoNotOptimize(score.total);
    }
}
BENCHMARK(CombinedMC);

}  // namespace

BENCHMARK_MAIN();
