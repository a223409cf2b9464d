#include <catch_amalgamated.hpp>

#include <vector>

#include "h2sim/sparse_backward.hpp"
#include "h2sim/verify/suites.hpp"

using namespace h2sim;
using Catch::Approx;

TEST_CASE("Output finder alternates between buffers", "[finder]") {
    BitPlane mask(4, 4);
    auto empty = split_output_ids(mask, 2);
    REQUIRE(empty.size() == 2);
    CHECK(empty[0].ids.empty());
    CHECK(empty[1].ids.empty());

    for (std::size_t i : {0u, 3u, 6u, 11u, 14u}) mask.set(i);
    const auto b = split_output_ids(mask, 2);
    CHECK(b[0].ids.size() == 3);
    CHECK(b[1].ids.size() == 2);

    BitPlane point(4, 4);
    point.set(2, 3);
    const auto p = split_output_ids(point, 2);
    REQUIRE(p[0].ids.size() == 1);
    CHECK(p[0].ids[0] == PlaneCoord{2, 3});
}

TEST_CASE("Output finder rejects a mismatched compressed tile", "[finder]") {
    BitPlane mask(2, 2);
    mask.set(0, 1);
    CompressedPotentialTile cu{mask, {}};
    CHECK_THROWS_AS(effectual_output_finder(mask, cu), CorruptedStateError);
}

TEST_CASE("IO finder enumerates window tag bits", "[finder]") {
    const ConvGeometry k2{2, 1, 0};
    const PlaneCoord out{1, 1};

    SECTION("tag 0b1001") {
        bool found = false;
        for (unsigned subset = 0; subset < 16 && !found; ++subset) {
            BitPlane in(2, 2);
            for (unsigned b = 0; b < 4; ++b)
                if (subset & (1u << b)) in.set(b);
            if (window_tag(out, in, k2) != 0b1001) continue;
            found = true;
            const auto tasks = effectual_io_finder(out, in, k2);
            REQUIRE(tasks.size() == 2);
            CHECK(tasks[0].w_id == PlaneCoord{0, 0});
            CHECK(tasks[1].w_id == PlaneCoord{1, 1});
        }
        CHECK(found);
    }
    SECTION("empty tag") {
        CHECK(effectual_io_finder(out, BitPlane(2, 2), k2).empty());
    }
    SECTION("dense 3x3 window in row-major order") {
        BitPlane in(3, 3);
        for (std::size_t i = 0; i < in.size(); ++i) in.set(i);
        const auto tasks = effectual_io_finder({1, 1}, in, same_geometry(3));
        REQUIRE(tasks.size() == 9);
        for (int i = 0; i < 9; ++i) CHECK(tasks[static_cast<std::size_t>(i)].w_id == PlaneCoord{i / 3, i % 3});
    }
}

TEST_CASE("Sparse execution", "[execute]") {
    const ConvGeometry g{1, 1, 0};
    const std::vector<Real> kernel{0.5f};
    const std::vector<Real> grad{0.2f};
    const auto none = sparse_conv_execute({{}, {}}, kernel, g, grad, 1, 1, 1, 1);
    CHECK(none[0] == 0.0f);

    const ConvTask t{{0, 0}, {0, 0}, {0, 0}};
    BackwardStats st;
    const auto one = sparse_conv_execute({{t}, {}}, kernel, g, grad, 1, 1, 1, 1, Precision::fp32, &st);
    CHECK(one[0] == Approx(0.1));
    CHECK(st.macs == 1);
}

TEST_CASE("Grad unit", "[grad-unit]") {
    LifParams p;
    p.alpha = 0.5;
    p.th_l = 0.0;
    p.th_r = 1.0;
    p.beta = 1.0;
    BitPlane s(1, 1);
    BitPlane window(1, 1);
    window.set(0, 0);
    const auto r = grad_unit(std::vector<Real>{0.3f}, std::vector<Real>{0.5f}, std::vector<Real>{0.2f}, s, window, p);
    CHECK(r.grad_u[0] == Approx(0.35));
    CHECK(r.mask.get(0, 0));

    const auto z = grad_unit(std::vector<Real>{0.0f}, std::vector<Real>{0.5f}, std::vector<Real>{0.0f}, s, window, p);
    CHECK(z.grad_u[0] == 0.0f);
    CHECK_FALSE(z.mask.get(0, 0));

    // Outside the window and no temporal gradient: nothing survives.
    const auto gated =
        grad_unit(std::vector<Real>{0.7f}, std::vector<Real>{0.5f}, std::vector<Real>{0.0f}, s, BitPlane(1, 1), p);
    CHECK(gated.grad_u[0] == 0.0f);
}

TEST_CASE("FC backward mode", "[fc]") {
    const std::vector<Real> identity{1, 0, 0, 0, 1, 0, 0, 0, 1};
    const std::vector<Real> g{0.5f, -1.0f, 2.0f};
    CHECK(fc_backward_mode(g, identity, 3) == g);
    const auto z = fc_backward_mode(std::vector<Real>(3, 0.0f), identity, 3);
    for (Real v : z) CHECK(v == 0.0f);
}

TEST_CASE("Sparse backward against brute force and dense", "[oracle]") {
    verify::SuiteOptions opt;
    for (const auto& check : {verify::check_sparse_work_accounting, verify::check_buffer_balance,
                              verify::check_task_monotonicity, verify::check_engine_equivalence}) {
        const verify::CheckResult r = check(opt);
        INFO(r.name << ": " << r.detail);
        CHECK(r.passed);
    }
}
