#include <catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "h2sim/lif.hpp"
#include "h2sim/model.hpp"
#include "h2sim/verify/suites.hpp"

using namespace h2sim;
using Catch::Approx;

namespace {

LifParams window01() {
    LifParams p;
    p.alpha = 0.5;
    p.th_f = 1.0;
    p.th_l = 0.0;
    p.th_r = 1.0;
    p.beta = 1.0;
    return p;
}

const Shape kScalar{1, 1, 1, 1, 1};

}  // namespace

TEST_CASE("LIF params are validated", "[lif]") {
    LifParams p;
    REQUIRE_NOTHROW(p.validate());
    p.th_l = 2.0;
    REQUIRE_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.alpha = 0.0;
    REQUIRE_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.beta = 0.0;
    REQUIRE_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("LIF update from a zero state stays silent", "[lif]") {
    LifParams p = window01();
    p.th_l = -0.5;
    const auto r = lif_update(ActivationTensor(kScalar), LifState::zero(kScalar), p);
    CHECK(r.u[0] == 0.0f);
    CHECK_FALSE(r.s.test(0));
    CHECK(r.mask.test(0));  // 0 lies inside (-0.5, 1)

    p.th_l = 0.0;
    CHECK_FALSE(lif_update(ActivationTensor(kScalar), LifState::zero(kScalar), p).mask.test(0));
}

TEST_CASE("LIF update integrates and resets", "[lif]") {
    const LifParams p = window01();
    LifState st = LifState::zero(kScalar);
    st.u[0] = 0.8f;
    ActivationTensor x(kScalar, 0.4f);
    auto r = lif_update(x, st, p);
    CHECK(r.u[0] == Approx(0.8));
    CHECK_FALSE(r.s.test(0));

    st.u[0] = 2.0f;
    st.s.set(0);
    r = lif_update(x, st, p);
    CHECK(r.u[0] == Approx(0.4));
}

TEST_CASE("Rectangular surrogate", "[lif]") {
    LifParams p;
    p.th_l = -0.25;
    p.th_r = 0.75;
    p.beta = 2.0;
    CHECK(fire_derivative((p.th_l + p.th_r) / 2, p) == 2.0);
    CHECK(fire_derivative(p.th_r, p) == 0.0);
    CHECK(fire_derivative(p.th_l, p) == 0.0);
    CHECK(fire_derivative(0.5, window01()) == 1.0);
}

TEST_CASE("Backward step on a single neuron", "[lif][backward]") {
    const LifParams p = window01();
    GradTensor next(kScalar, 0.2f);
    GradTensor spatial(kScalar, 0.3f);
    SpikeTensor s(kScalar);

    PotentialTensor u(kScalar, 0.5f);
    auto r = backward_from_spatial(next, u, spatial, s, p);
    CHECK(r.grad_s[0] == Approx(0.25));
    CHECK(r.grad_u[0] == Approx(0.35));
    CHECK(r.mask.test(0));

    u[0] = 2.0f;
    r = backward_from_spatial(next, u, spatial, s, p);
    CHECK(r.grad_u[0] == Approx(0.1));
}

TEST_CASE("Backward step with zero gradients is empty", "[lif][backward]") {
    const Shape shape{1, 1, 2, 3, 3};
    PotentialTensor u(shape, 0.5f);
    const auto r = backward_from_spatial(GradTensor(shape), u, GradTensor(shape), SpikeTensor(shape), window01());
    for (std::size_t i = 0; i < shape.size(); ++i) {
        CHECK(r.grad_s[i] == 0.0f);
        CHECK(r.grad_u[i] == 0.0f);
    }
    CHECK(r.mask.popcount() == 0);
}

TEST_CASE("Weight gradient matches a naive loop", "[weight-gradient]") {
    SECTION("single term") {
        GradTensor g(kScalar, 0.75f);
        SpikeTensor s(kScalar);
        s.set(0);
        const auto w = weight_gradient(g, s, WeightOp::conv({1, 1, 0}));
        CHECK(w[0] == 0.75f);
        CHECK(weight_gradient(g, SpikeTensor(kScalar), WeightOp::conv({1, 1, 0}))[0] == 0.0f);
    }
    SECTION("2x2 gradient over a 3x3 input, k = 2") {
        std::mt19937_64 rng(3);
        const ConvGeometry geom{2, 1, 0};
        GradTensor g(Shape{1, 1, 1, 2, 2});
        SpikeTensor s(Shape{1, 1, 1, 3, 3});
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<Real>(static_cast<int>(rng() % 9) - 4) * 0.5f;
        for (std::size_t i = 0; i < s.size(); ++i) s.set(i, rng() % 2 == 0);
        const auto w = weight_gradient(g, s, WeightOp::conv(geom));
        for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx) {
                double want = 0;
                for (int oy = 0; oy < 2; ++oy)
                    for (int ox = 0; ox < 2; ++ox)
                        if (s.test(0, 0, 0, oy + ky, ox + kx)) want += g.at(0, 0, 0, oy, ox);
                CHECK(w.at(ky, kx, 0, 0) == static_cast<Real>(want));
            }
    }
}

TEST_CASE("Average pooling", "[pool]") {
    const Shape in{1, 1, 1, 2, 2};
    ActivationTensor x(in, 1.0f);
    CHECK(avg_pool_forward(x, 2)[0] == 1.0f);
    x = ActivationTensor(in);
    x[0] = 1.0f;
    CHECK(avg_pool_forward(x, 2)[0] == 0.25f);
    GradTensor g(Shape{1, 1, 1, 1, 1}, 0.8f);
    const auto back = avg_pool_backward(g, 2, in);
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == Approx(0.2));
}

TEST_CASE("Rate-coded loss", "[loss]") {
    const LifParams p = window01();
    const Shape out{1, 2, 2, 1, 1};
    const std::vector<int> label1{1};

    SECTION("wrong class firing every step costs 2") {
        SpikeTensor s(out);
        s.set(out.index(0, 0, 0, 0, 0));
        s.set(out.index(0, 1, 0, 0, 0));
        const auto r = loss_and_output_gradient(s, PotentialTensor(out, 0.5f), label1, p);
        CHECK(r.loss == Approx(2.0));
    }
    SECTION("perfect rates cost nothing") {
        SpikeTensor s(out);
        s.set(out.index(0, 0, 1, 0, 0));
        s.set(out.index(0, 1, 1, 0, 0));
        const auto r = loss_and_output_gradient(s, PotentialTensor(out, 0.5f), label1, p);
        CHECK(r.loss == 0.0);
        for (std::size_t i = 0; i < r.seed_grad_u.size(); ++i) CHECK(r.seed_grad_u[i] == 0.0f);
    }
    SECTION("potentials outside the window give no seed gradient") {
        const auto r = loss_and_output_gradient(SpikeTensor(out), PotentialTensor(out, 3.0f), label1, p);
        CHECK(r.loss > 0.0);
        for (std::size_t i = 0; i < r.seed_grad_u.size(); ++i) CHECK(r.seed_grad_u[i] == 0.0f);
    }
}

TEST_CASE("Zero learning rate leaves weights unchanged", "[train]") {
    NetworkSpec net;
    net.layers = parse_network("4C3-AP2-3FC");
    net.in_c = 2;
    net.in_h = 6;
    net.in_w = 6;
    net.timesteps = 3;
    net.sub_batch = 2;
    const NetworkPlan plan = resolve(net);
    const Weights w = init_weights(plan, 11);
    Batch b;
    b.input = ActivationTensor(Shape{2, 3, 2, 6, 6});
    for (std::size_t i = 0; i < b.input.size(); i += 3) b.input[i] = 1.0f;
    b.labels = {0, 2};
    TrainOptions opt;
    opt.learning_rate = 0.0;
    const StepResult r = train_step(net, w, b, opt);
    REQUIRE(r.weights.size() == w.size());
    for (std::size_t l = 0; l < w.size(); ++l) CHECK(r.weights[l].values().size() == w[l].values().size());
    for (std::size_t l = 0; l < w.size(); ++l)
        CHECK(std::equal(r.weights[l].values().begin(), r.weights[l].values().end(), w[l].values().begin()));
}

TEST_CASE("Golden model against the unrolled-graph oracle", "[train][oracle]") {
    verify::SuiteOptions opt;
    opt.fixtures = 40;
    for (const auto& check : {verify::check_oracle_equivalence, verify::check_mask_consistency,
                              verify::check_reset_correctness, verify::check_determinism}) {
        const verify::CheckResult r = check(opt);
        INFO(r.name << ": " << r.detail);
        CHECK(r.passed);
    }
}
