#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "h2sim/lut_engine.hpp"

using namespace h2sim;

namespace {

struct Plane {
    BitPlane spikes;
    std::vector<Real> dense;
    std::vector<Real> kernel;
};

Plane make_plane(int size, double density) {
    std::mt19937_64 rng(42);
    std::bernoulli_distribution on(density);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Plane p{BitPlane(size, size), std::vector<Real>(static_cast<std::size_t>(size) * size), std::vector<Real>(9)};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (on(rng)) {
                p.spikes.set(y, x);
                p.dense[static_cast<std::size_t>(y) * size + x] = 1.0f;
            }
    for (Real& k : p.kernel) k = u(rng);
    return p;
}

void BM_LutConvForward(benchmark::State& state) {
    const Plane p = make_plane(static_cast<int>(state.range(0)), 0.2);
    const KernelLuts luts = build_kernel_luts(p.kernel, 3, LutPeConfig::forward_default());
    for (auto _ : state) benchmark::DoNotOptimize(lut_conv_forward(p.spikes, luts, same_geometry(3)));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_LutConvForward)->Arg(16)->Arg(56);

void BM_DirectConvForward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Plane p = make_plane(n, 0.2);
    for (auto _ : state) benchmark::DoNotOptimize(dense_conv_forward(p.dense, n, n, p.kernel, same_geometry(3)));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_DirectConvForward)->Arg(16)->Arg(56);

void BM_BuildSubLut(benchmark::State& state) {
    const Plane p = make_plane(4, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(build_kernel_luts(p.kernel, 3, LutPeConfig::forward_default()));
}
BENCHMARK(BM_BuildSubLut);

}  // namespace
