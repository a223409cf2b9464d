#include <catch_amalgamated.hpp>

#include <vector>

#include "h2sim/cycle_model.hpp"
#include "h2sim/verify/suites.hpp"

using namespace h2sim;

namespace {

struct Setup {
    NetworkSpec net;
    NetworkPlan plan;
};

Setup make(const char* layers, int c, int h, int w, int timesteps, int samples) {
    Setup s;
    s.net.layers = parse_network(layers);
    s.net.in_c = c;
    s.net.in_h = h;
    s.net.in_w = w;
    s.net.timesteps = timesteps;
    s.net.sub_batch = samples;
    s.plan = resolve(s.net);
    return s;
}

ActivityTrace uniform_trace(const Setup& s, double density, std::uint64_t seed = 1) {
    const std::vector<LayerDensity> d(static_cast<std::size_t>(s.plan.num_weight_layers()),
                                      LayerDensity{density, density, density});
    return synthetic_trace(s.plan, s.net.sub_batch, s.net.timesteps, d, seed);
}

}  // namespace

TEST_CASE("Feature-map tiling", "[tiles]") {
    const auto t = tile_feature_map(56, 56, TileSpec{});
    REQUIRE(t.size() == 16);
    CHECK(t.back().w == 8);
    CHECK(t.back().h == 8);
    CHECK(t[3] == TileRect{0, 48, 16, 8});

    const auto small = tile_feature_map(5, 7, TileSpec{});
    REQUIRE(small.size() == 1);
    CHECK(small[0].size() == 35);

    std::size_t covered = 0;
    for (const TileRect& r : tile_feature_map(37, 21, TileSpec{})) covered += r.size();
    CHECK(covered == 37u * 21u);
}

TEST_CASE("Memory bytes per cycle", "[memory]") {
    CHECK(MemoryConfig{}.bytes_per_cycle() == 160.0);
}

TEST_CASE("FE compute per tile", "[fe]") {
    const Setup s = make("1C3-2FC", 1, 16, 16, 1, 1);
    const EngineCycles fe = fe_cycles(s.plan, 0, uniform_trace(s, 0.5), HardwareConfig{});
    // 256 windows over 4 lanes, one logical PE per 3x3 kernel, plus one sub-LUT build.
    CHECK(fe.array == 64 + SubLut::build_cost(3));
    CHECK(fe.grid_iterations == 1);
    CHECK(fe.ops.lut_reads == 256u * 3u);
    CHECK(fe.ops.lut_reads == fe.ops.adds);
}

TEST_CASE("FE writes outputs once per pass over the input channels", "[fe]") {
    const Setup s = make("16C3-2FC", 256, 4, 4, 1, 1);
    const EngineCycles fe = fe_cycles(s.plan, 0, uniform_trace(s, 0.2), HardwareConfig{});
    REQUIRE(fe.output_writes == 1);
    CHECK(fe.grid_iterations / fe.output_writes == 4);
}

TEST_CASE("FE rejects a GLB that cannot hold a tile", "[fe]") {
    const Setup s = make("64C3-2FC", 64, 16, 16, 2, 1);
    HardwareConfig hw;
    hw.fe.glb_bytes = 1024;
    CHECK_THROWS_AS(fe_cycles(s.plan, 0, uniform_trace(s, 0.2), hw), ConfigError);
}

TEST_CASE("WUE maps timesteps onto rows", "[wue]") {
    const HardwareConfig hw;
    const Setup t10 = make("16C3-2FC", 16, 8, 8, 10, 1);
    const Setup t5 = make("16C3-2FC", 16, 8, 8, 5, 1);
    const EngineCycles a = wue_cycles(t10.plan, 0, uniform_trace(t10, 0.3), hw);
    const EngineCycles b = wue_cycles(t5.plan, 0, uniform_trace(t5, 0.3), hw);
    // T = 5 leaves 5 of the 10 rows idle but needs the same passes.
    CHECK(hw.wue.pe_rows - std::min(hw.wue.pe_rows, 5) == 5);
    CHECK(a.grid_iterations == b.grid_iterations);
    CHECK(a.array == b.array);
}

TEST_CASE("WUE columns split the gradient channels", "[wue]") {
    const Setup s = make("256C3-2FC", 16, 8, 8, 4, 1);
    const ActivityTrace tr = uniform_trace(s, 0.3);
    HardwareConfig hw;
    const auto base = wue_cycles(s.plan, 0, tr, hw).grid_iterations;
    hw.wue.pe_cols *= 2;
    hw.wue.glb_bytes *= 2;
    CHECK(wue_cycles(s.plan, 0, tr, hw).grid_iterations * 2 == base);
}

TEST_CASE("BE with empty masks only scans", "[be]") {
    const Setup s = make("16C3-16C3-2FC", 16, 8, 8, 2, 1);
    const EngineCycles be = be_cycles(s.plan, 0, uniform_trace(s, 0.0), HardwareConfig{});
    CHECK(be.ops.finder_tasks == 0);
    CHECK(be.ops.macs == 0);
    // Two (n, t) pairs, one 8x8 tile scanned 16 bits per cycle.
    CHECK(be.array == 2u * (64u / 16u));
}

TEST_CASE("BE with dense masks issues the dense MAC count", "[be]") {
    const Setup s = make("16C3-16C3-2FC", 16, 8, 8, 2, 1);
    const ActivityTrace tr = uniform_trace(s, 1.0);
    const HardwareConfig hw;
    const EngineCycles sparse = be_cycles(s.plan, 0, tr, hw, true);
    const EngineCycles dense = be_cycles(s.plan, 0, tr, hw, false);
    CHECK(sparse.ops.finder_tasks == dense.ops.macs);
    CHECK(sparse.ops.macs == dense.ops.macs);
}

TEST_CASE("Bound is monotone in bandwidth and parallelism", "[bound]") {
    const Setup s = make("32C3-AP2-32C3-4FC", 32, 16, 16, 4, 2);
    const ActivityTrace tr = uniform_trace(s, 0.3, 9);
    const HardwareConfig hw;
    auto totals = [&](const HardwareConfig& h) {
        std::vector<std::uint64_t> out;
        for (const LayerCycleReport& l : simulate_layers(s.plan, tr, h)) {
            out.push_back(l.forward.bound);
            out.push_back(l.backward.bound);
            out.push_back(l.weight_update.bound);
        }
        return out;
    };
    const auto base = totals(hw);

    HardwareConfig fast = hw;
    fast.memory.bytes_per_second *= 2;
    const auto f = totals(fast);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(f[i] <= base[i]);

    HardwareConfig wide = hw;
    wide.fe.parallelism *= 2;
    wide.wue.parallelism *= 2;
    wide.be.parallelism *= 2;
    const auto w = totals(wide);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(w[i] <= base[i]);
}

TEST_CASE("Synthetic masks follow the requested densities", "[synthetic]") {
    const Setup s = make("16C3-16C3-2FC", 16, 16, 16, 4, 2);
    const ActivityTrace tr = uniform_trace(s, 0.25, 5);
    const auto d = measure_densities(tr);
    CHECK(d[0].input_spikes == Catch::Approx(0.25).margin(0.02));
    CHECK(d[0].spike_grad == Catch::Approx(0.25).margin(0.02));
    CHECK(d[1].potential_grad == Catch::Approx(0.25).margin(0.02));
    const ActivityTrace again = uniform_trace(s, 0.25, 5);
    CHECK(again.layers[1].potential_grad == tr.layers[1].potential_grad);
}

TEST_CASE("Cycle-model counters against the functional engines", "[replay]") {
    verify::SuiteOptions opt;
    for (const auto& check : {verify::check_replay_agreement, verify::check_synthetic_vs_replay}) {
        const verify::CheckResult r = check(opt);
        INFO(r.name << ": " << r.detail);
        CHECK(r.passed);
    }
}
