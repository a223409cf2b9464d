#include <catch_amalgamated.hpp>

#include <numeric>
#include <vector>

#include "h2sim/lut_engine.hpp"
#include "h2sim/verify/suites.hpp"

using namespace h2sim;

TEST_CASE("Sub-LUT holds every subset sum", "[sublut]") {
    const std::vector<Real> two{1.5f, -0.25f};
    const SubLut a = build_sublut(two);
    REQUIRE(a.size() == 4);
    CHECK(a[0] == 0.0f);
    CHECK(a[1] == 1.5f);
    CHECK(a[2] == -0.25f);
    CHECK(a[3] == 1.25f);

    const std::vector<Real> three{1.0f, 2.0f, 4.0f};
    CHECK(build_sublut(three)[0b011] == 3.0f);

    const std::vector<Real> nine(9, 1.0f);
    CHECK_THROWS_AS(build_sublut(nine), ConfigError);
}

TEST_CASE("Build cost of an incremental table", "[sublut]") {
    CHECK(SubLut::build_cost(1) == 0);
    CHECK(SubLut::build_cost(3) == 4);
    CHECK(SubLut::build_cost(4) == 11);
}

TEST_CASE("Splitting a 2x2 window halves the table", "[sublut]") {
    const std::vector<Real> kernel{1, 2, 3, 4};
    CHECK(build_sublut(kernel).size() == 16);
    // Row segments: one 1x2 sub-LUT per kernel row.
    const KernelLuts luts = build_kernel_luts(kernel, 2, LutPeConfig{2, 2, 2, 2, 2});
    REQUIRE(luts.segments.size() == 2);
    CHECK(luts.segments[0].size() + luts.segments[1].size() == 8);
    CHECK(luts.segments[1][0b11] == 7.0f);
}

TEST_CASE("LUT forward convolution", "[lut-forward]") {
    const ConvGeometry geom = same_geometry(3);
    std::vector<Real> kernel(9);
    std::iota(kernel.begin(), kernel.end(), 1.0f);

    SECTION("no spikes") {
        const auto ps = lut_conv_forward(BitPlane(8, 8), kernel, geom);
        for (Real v : ps) CHECK(v == 0.0f);
    }
    SECTION("full window sums the kernel") {
        BitPlane ones(3, 3);
        for (std::size_t i = 0; i < ones.size(); ++i) ones.set(i);
        const auto ps = lut_conv_forward(ones, kernel, ConvGeometry{3, 1, 0});
        REQUIRE(ps.size() == 1);
        CHECK(ps[0] == 45.0f);
    }
    SECTION("window reads per output") {
        LutStats st;
        lut_conv_forward(BitPlane(8, 8), kernel, geom, LutPeConfig::forward_default(), Precision::fp32, &st);
        CHECK(st.lut_reads == 64u * 3u);
    }
}

TEST_CASE("LUT weight-gradient segment lookup", "[lut-weightgrad]") {
    const std::vector<Real> seg{1, 2, 4, 8};
    CHECK(build_sublut(seg)[0b0101] == 5.0f);

    std::vector<Real> grad(16, 1.0f);
    const auto w = lut_conv_weightgrad(BitPlane(4, 4), grad, 4, 4, 3, same_geometry(3));
    for (Real v : w) CHECK(v == 0.0f);
}

TEST_CASE("FC LUT mode", "[fc]") {
    BitPlane s(1, 3);
    s.set(0, 0);
    s.set(0, 2);
    const std::vector<Real> v{2, 3, 5};
    const auto out = fc_lut_mode(s, v, 1);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 7.0f);
    CHECK(fc_lut_mode(BitPlane(1, 3), v, 1)[0] == 0.0f);
}

TEST_CASE("Soma stores only potentials inside the window", "[soma]") {
    LifParams p;
    p.th_f = 1.0;
    p.th_l = 0.0;
    p.th_r = 1.0;
    const std::vector<Real> u_prev{0.0f};
    const BitPlane s_prev(1, 1);

    PartialSumTile ps(1, 1, 1);
    ps.accumulate(std::vector<Real>{0.9f});
    const SomaResult a = soma(ps, u_prev, s_prev, p);
    CHECK(a.mask.get(0, 0));
    CHECK_FALSE(a.spikes.get(0, 0));
    REQUIRE(a.compressed);
    CHECK(a.compressed->values == std::vector<Real>{0.9f});

    p.th_r = 1.5;
    PartialSumTile big(1, 1, 1);
    big.accumulate(std::vector<Real>{2.0f});
    const SomaResult b = soma(big, u_prev, s_prev, p);
    CHECK(b.spikes.get(0, 0));
    CHECK_FALSE(b.mask.get(0, 0));
    CHECK(b.compressed->values.empty());

    PartialSumTile partial(1, 1, 2);
    partial.accumulate(std::vector<Real>{0.5f});
    CHECK_THROWS_AS(soma(partial, u_prev, s_prev, p), SequencingError);
}

TEST_CASE("Compressed potential roundtrip", "[soma]") {
    LifParams p;
    const std::vector<Real> u{-1.0f, 0.25f, 0.5f, 3.0f, 0.75f, 1.0f};
    const auto c = compress_potential(u, 2, 3, p);
    CHECK(c.decompress() == std::vector<Real>{0.0f, 0.25f, 0.5f, 0.0f, 0.75f, 0.0f});
    auto broken = c;
    broken.values.pop_back();
    CHECK_THROWS_AS(broken.check(), CorruptedStateError);
}

TEST_CASE("LUT paths against direct loops", "[lut][oracle]") {
    verify::SuiteOptions opt;
    for (const auto& check : {verify::check_lut_equivalence, verify::check_compression_roundtrip}) {
        const verify::CheckResult r = check(opt);
        INFO(r.name << ": " << r.detail);
        CHECK(r.passed);
    }
}
