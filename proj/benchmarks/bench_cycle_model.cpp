#include <benchmark/benchmark.h>

#include <vector>

#include "h2sim/cycle_model.hpp"

using namespace h2sim;

namespace {

NetworkPlan plan_for(int channels, int size) {
    NetworkSpec net;
    net.in_c = channels;
    net.in_h = size;
    net.in_w = size;
    net.timesteps = 4;
    net.sub_batch = 2;
    net.layers = parse_network(std::to_string(channels) + "C3-" + std::to_string(channels) + "C3-10FC");
    return resolve(net);
}

// Range: gradient sparsity in percent.
void BM_BackwardEngine(benchmark::State& state) {
    const NetworkPlan plan = plan_for(64, 32);
    const double density = 1.0 - static_cast<double>(state.range(0)) / 100.0;
    const std::vector<LayerDensity> d(3, LayerDensity{0.2, density, density});
    const ActivityTrace trace = synthetic_trace(plan, 2, 4, d, 1);
    const HardwareConfig hw;
    for (auto _ : state) benchmark::DoNotOptimize(be_cycles(plan, 0, trace, hw));
}
BENCHMARK(BM_BackwardEngine)->Arg(0)->Arg(50)->Arg(75)->Arg(90)->Unit(benchmark::kMillisecond);

void BM_ForwardEngine(benchmark::State& state) {
    const NetworkPlan plan = plan_for(64, 32);
    const std::vector<LayerDensity> d(3, LayerDensity{});
    const ActivityTrace trace = synthetic_trace(plan, 2, 4, d, 1);
    const HardwareConfig hw;
    for (auto _ : state) benchmark::DoNotOptimize(fe_cycles(plan, 1, trace, hw));
}
BENCHMARK(BM_ForwardEngine)->Unit(benchmark::kMillisecond);

void BM_SyntheticTrace(benchmark::State& state) {
    const NetworkPlan plan = plan_for(64, 32);
    const std::vector<LayerDensity> d(3, LayerDensity{});
    for (auto _ : state) benchmark::DoNotOptimize(synthetic_trace(plan, 2, 4, d, 1));
}
BENCHMARK(BM_SyntheticTrace)->Unit(benchmark::kMillisecond);

}  // namespace
