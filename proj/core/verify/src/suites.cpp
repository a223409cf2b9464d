#include "h2sim/verify/suites.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "h2sim/engine_model.hpp"
#include "h2sim/verify/fixtures.hpp"
#include "h2sim/verify/oracle.hpp"

namespace h2sim::verify {

namespace {

constexpr double kFloatTolerance = 1e-5;

/// Records the first failure and counts cases.
class Checker {
public:
    explicit Checker(std::string name) { result_.name = std::move(name); }

    void next_case() { ++result_.cases; }
    bool expect(bool ok, const std::string& what) {
        if (!ok && result_.passed) {
            result_.passed = false;
            result_.detail = "case " + std::to_string(result_.cases) + ": " + what;
        }
        return ok;
    }
    bool failed() const { return !result_.passed; }
    CheckResult finish(const std::string& summary) {
        if (result_.passed) result_.detail = summary;
        return result_;
    }

private:
    CheckResult result_;
};

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::vector<double> widen(std::span<const Real> v) { return {v.begin(), v.end()}; }

/// Exact on integer fixtures, relative tolerance otherwise.
bool close(std::span<const Real> a, std::span<const double> b, bool exact, double& worst) {
    if (exact) return exactly_equal(a, b);
    const double e = relative_error(a, b);
    worst = std::max(worst, e);
    return e <= kFloatTolerance;
}

bool close(std::span<const Real> a, std::span<const Real> b, bool exact, double& worst) {
    return close(a, widen(b), exact, worst);
}

std::string where(const Fixture& f, int group, int layer, const char* tensor) {
    return std::string(tensor) + " of layer " + std::to_string(layer) + ", sub-batch " + std::to_string(group) +
           " differs on " + f.description();
}

bool is_support(const MaskTensor& mask, std::span<const Real> values) {
    if (mask.size() != values.size()) return false;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask.test(i) != (values[i] != 0)) return false;
    return true;
}

/// Direct convolution of one plane, independent of the library's conv loops.
std::vector<double> direct_conv(std::span<const Real> in, int h, int w, std::span<const Real> kernel,
                                const ConvGeometry& g) {
    const int oh = g.out_size(h);
    const int ow = g.out_size(w);
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int ky = 0; ky < g.k; ++ky)
                for (int kx = 0; kx < g.k; ++kx) {
                    const int iy = oy * g.stride - g.pad + ky;
                    const int ix = ox * g.stride - g.pad + kx;
                    if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
                    out[static_cast<std::size_t>(oy) * ow + ox] +=
                        static_cast<double>(in[static_cast<std::size_t>(iy) * w + ix]) *
                        kernel[static_cast<std::size_t>(ky) * g.k + kx];
                }
    return out;
}

/// Weight gradient of one channel pair by the naive quadruple loop.
std::vector<double> direct_weightgrad(std::span<const Real> in, int h, int w, std::span<const Real> grad, int oh,
                                      int ow, const ConvGeometry& g) {
    std::vector<double> out(static_cast<std::size_t>(g.k) * g.k, 0.0);
    for (int ky = 0; ky < g.k; ++ky)
        for (int kx = 0; kx < g.k; ++kx)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const int iy = oy * g.stride - g.pad + ky;
                    const int ix = ox * g.stride - g.pad + kx;
                    if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
                    out[static_cast<std::size_t>(ky) * g.k + kx] +=
                        static_cast<double>(in[static_cast<std::size_t>(iy) * w + ix]) *
                        grad[static_cast<std::size_t>(oy) * ow + ox];
                }
    return out;
}

std::vector<Real> plane_values(const BitPlane& p) {
    std::vector<Real> v(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) v[i] = p.test(i) ? 1.0f : 0.0f;
    return v;
}

std::vector<Real> random_values(std::mt19937_64& rng, std::size_t count, bool integer_valued) {
    std::vector<Real> v(count);
    std::uniform_int_distribution<int> q(-4, 4);
    std::uniform_real_distribution<double> r(-1.0, 1.0);
    for (auto& x : v) x = integer_valued ? static_cast<Real>(q(rng)) * 0.25f : static_cast<Real>(r(rng));
    return v;
}

/// Effectual tasks of one output position counted straight from the forward
/// conv definition: input pixel (y, x) feeds output (oy, ox) through (ky, kx).
std::uint64_t brute_force_tasks(const BitPlane& out_mask, const BitPlane& in_mask, const ConvGeometry& g) {
    std::uint64_t total = 0;
    for (int y = 0; y < out_mask.height(); ++y)
        for (int x = 0; x < out_mask.width(); ++x) {
            if (!out_mask.get(y, x)) continue;
            for (int oy = 0; oy < in_mask.height(); ++oy)
                for (int ox = 0; ox < in_mask.width(); ++ox)
                    for (int ky = 0; ky < g.k; ++ky)
                        for (int kx = 0; kx < g.k; ++kx)
                            if (oy * g.stride - g.pad + ky == y && ox * g.stride - g.pad + kx == x &&
                                in_mask.get(oy, ox))
                                ++total;
        }
    return total;
}

struct TileCase {
    ConvGeometry geom;
    int h = 0;
    int w = 0;
    BitPlane out_mask;
    BitPlane in_mask;
};

TileCase random_tile(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 3);
    const int ks[] = {1, 3, 3, 5};
    TileCase c;
    const int stride = std::bernoulli_distribution(0.25)(rng) ? 2 : 1;
    c.geom = same_geometry(ks[pick(rng)], stride);
    c.h = std::uniform_int_distribution<int>(1, 16)(rng);
    c.w = std::uniform_int_distribution<int>(1, 16)(rng);
    std::uniform_real_distribution<double> density(0.0, 1.0);
    c.out_mask = random_plane(rng, c.h, c.w, density(rng));
    c.in_mask = random_plane(rng, c.geom.out_size(c.h), c.geom.out_size(c.w), density(rng));
    return c;
}

std::uint64_t count_tasks(const BitPlane& out_mask, const BitPlane& in_mask, const ConvGeometry& g) {
    BackwardStats stats;
    generate_tasks(split_output_ids(out_mask, 2), in_mask, g, &stats);
    return stats.finder_tasks;
}

}  // namespace

CheckResult check_oracle_equivalence(const SuiteOptions& opt) {
    Checker c("oracle-equivalence");
    std::mt19937_64 rng(opt.seed);
    double worst = 0;
    int integer_cases = 0;
    for (int i = 0; i < opt.fixtures && !c.failed(); ++i) {
        const bool integer_valued = i % 2 == 0;
        const Fixture f = random_fixture(rng, integer_valued);
        c.next_case();
        integer_cases += integer_valued;
        TrainOptions train;
        train.learning_rate = 0.25;
        const StepResult step = train_step(f.net, f.weights, f.batch, train);

        std::vector<std::vector<double>> grad_sum(f.weights.size());
        for (int g = 0; g < f.net.batch_group && !c.failed(); ++g) {
            const int first = g * f.net.sub_batch;
            const ActivationTensor input = expand_input(f.net, f.batch.input, first, f.net.sub_batch);
            const std::span<const int> labels(f.batch.labels.data() + first, static_cast<std::size_t>(f.net.sub_batch));
            const OracleResult ref = oracle_sub_batch(f.net, f.weights, input, labels);
            const SubBatchRecord& rec = step.sub_batches[static_cast<std::size_t>(g)];

            const double loss_err = std::fabs(rec.loss_sum - ref.loss_sum) / std::max(1.0, std::fabs(ref.loss_sum));
            c.expect(integer_valued ? rec.loss_sum == ref.loss_sum : loss_err <= kFloatTolerance,
                     "loss " + fmt(rec.loss_sum) + " vs " + fmt(ref.loss_sum) + " on " + f.description());
            for (std::size_t l = 0; l < ref.layers.size() && !c.failed(); ++l) {
                const OracleLayer& o = ref.layers[l];
                const LayerForward& fw = rec.forward[l];
                const LayerBackward& bw = rec.backward[l];
                const int li = static_cast<int>(l);
                c.expect(bits_equal(fw.s, o.s), where(f, g, li, "s"));
                c.expect(close(fw.u.values(), o.u, integer_valued, worst), where(f, g, li, "u"));
                c.expect(close(bw.grad_u.values(), o.grad_u, integer_valued, worst), where(f, g, li, "grad_u"));
                c.expect(close(bw.grad_w.values(), o.grad_w, integer_valued, worst), where(f, g, li, "grad_w"));
                auto& sum = grad_sum[l];
                sum.resize(o.grad_w.size(), 0.0);
                for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += o.grad_w[k];
            }
        }
        // The SGD update seen through the oracle gradients. Updated weights are
        // rounded to float once per sub-batch, so this one uses the tolerance.
        const double scale = train.learning_rate / f.net.batch_size();
        for (std::size_t l = 0; l < f.weights.size() && !c.failed(); ++l) {
            std::vector<double> expected(f.weights[l].size());
            for (std::size_t k = 0; k < expected.size(); ++k)
                expected[k] = f.weights[l][k] - scale * grad_sum[l][k];
            double update_err = 0;
            c.expect(close(step.weights[l].values(), expected, false, update_err),
                     "updated weights of layer " + std::to_string(l) + " on " + f.description());
        }
    }
    return c.finish(std::to_string(integer_cases) + " integer fixtures exact, float max rel err " + fmt(worst));
}

CheckResult check_engine_equivalence(const SuiteOptions& opt) {
    Checker c("engine-equivalence");
    std::mt19937_64 rng(opt.seed + 1);
    double worst = 0;
    for (int i = 0; i < opt.fixtures && !c.failed(); ++i) {
        const bool integer_valued = i % 2 == 0;
        const Fixture f = random_fixture(rng, integer_valued);
        c.next_case();
        TrainOptions train;
        train.learning_rate = 0.25;
        const StepResult golden = train_step(f.net, f.weights, f.batch, train);
        const EngineStepResult engine = engine_train_step(f.net, f.weights, f.batch, train.learning_rate);

        for (int g = 0; g < f.net.batch_group && !c.failed(); ++g) {
            const SubBatchRecord& ref = golden.sub_batches[static_cast<std::size_t>(g)];
            const EngineSubBatch& got = engine.sub_batches[static_cast<std::size_t>(g)];
            const double loss_err = std::fabs(got.loss_sum - ref.loss_sum) / std::max(1.0, std::fabs(ref.loss_sum));
            c.expect(integer_valued ? got.loss_sum == ref.loss_sum : loss_err <= kFloatTolerance,
                     "loss on " + f.description());
            for (std::size_t l = 0; l < ref.forward.size() && !c.failed(); ++l) {
                const int li = static_cast<int>(l);
                const LayerForward& a = got.forward[l];
                const LayerForward& b = ref.forward[l];
                c.expect(a.s == b.s, where(f, g, li, "s"));
                c.expect(a.spike_grad_mask == b.spike_grad_mask, where(f, g, li, "spike-grad mask"));
                c.expect(close(a.u.values(), b.u.values(), integer_valued, worst), where(f, g, li, "u"));
                const LayerBackward& x = got.backward[l];
                const LayerBackward& y = ref.backward[l];
                c.expect(close(x.grad_u.values(), y.grad_u.values(), integer_valued, worst),
                         where(f, g, li, "grad_u"));
                c.expect(integer_valued ? x.potential_grad_mask == y.potential_grad_mask
                                        : is_support(x.potential_grad_mask, x.grad_u.values()),
                         where(f, g, li, "potential-grad mask"));
                c.expect(close(x.grad_w.values(), y.grad_w.values(), integer_valued, worst),
                         where(f, g, li, "grad_w"));
            }
        }
        for (std::size_t l = 0; l < f.weights.size() && !c.failed(); ++l)
            c.expect(close(engine.weights[l].values(), golden.weights[l].values(), integer_valued, worst),
                     "updated weights of layer " + std::to_string(l) + " on " + f.description());
    }
    return c.finish("float max rel err " + fmt(worst));
}

CheckResult check_mask_consistency(const SuiteOptions& opt) {
    Checker c("mask-consistency");
    std::mt19937_64 rng(opt.seed + 2);
    for (int i = 0; i < opt.fixtures / 2 && !c.failed(); ++i) {
        const Fixture f = random_fixture(rng, i % 2 == 0);
        c.next_case();
        const StepResult step = train_step(f.net, f.weights, f.batch, {});
        for (const SubBatchRecord& rec : step.sub_batches)
            for (std::size_t l = 0; l < rec.forward.size(); ++l) {
                c.expect(rec.forward[l].spike_grad_mask == spike_grad_mask(rec.forward[l].u, f.net.lif),
                         "spike-grad mask of layer " + std::to_string(l) + " on " + f.description());
                c.expect(is_support(rec.backward[l].potential_grad_mask, rec.backward[l].grad_u.values()),
                         "potential-grad mask of layer " + std::to_string(l) + " on " + f.description());
            }
    }
    // Exhaustive check of single LIF updates on random tensors, window edges included.
    std::uniform_real_distribution<double> dist(-1.5, 2.5);
    for (int i = 0; i < 200 && !c.failed(); ++i) {
        c.next_case();
        LifParams p;
        const Shape s{2, 1, 3, 5, 5};
        ActivationTensor spatial(s);
        LifState state = LifState::zero(s);
        for (std::size_t k = 0; k < s.size(); ++k) {
            spatial[k] = static_cast<Real>(dist(rng));
            state.u[k] = static_cast<Real>(dist(rng));
            if (rng() % 3 == 0) state.s.set(k);
            if (rng() % 7 == 0) spatial[k] = static_cast<Real>(rng() % 2);
        }
        const LifStepResult r = lif_update(spatial, state, p);
        c.expect(r.mask == spike_grad_mask(r.u, p), "lif_update mask differs from the recomputed mask");
        for (std::size_t k = 0; k < s.size(); ++k)
            c.expect(r.mask.test(k) == (p.th_l < r.u[k] && r.u[k] < p.th_r), "mask bit outside its window rule");
    }
    return c.finish("masks match u and grad_u support");
}

CheckResult check_reset_correctness(const SuiteOptions& opt) {
    Checker c("reset-correctness");
    std::mt19937_64 rng(opt.seed + 3);
    std::uniform_real_distribution<double> dist(-2.0, 3.0);
    for (int i = 0; i < 300 && !c.failed(); ++i) {
        c.next_case();
        LifParams p;
        p.alpha = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
        const Shape s{1, 1, 2, 4, 4};
        ActivationTensor spatial(s);
        LifState a = LifState::zero(s);
        for (std::size_t k = 0; k < s.size(); ++k) {
            spatial[k] = static_cast<Real>(dist(rng));
            a.u[k] = static_cast<Real>(dist(rng));
            if (rng() % 2 == 0) a.s.set(k);
        }
        LifState b = a;
        for (std::size_t k = 0; k < s.size(); ++k)
            if (b.s.test(k)) b.u[k] = static_cast<Real>(dist(rng) * 10.0);
        const LifStepResult ra = lif_update(spatial, a, p);
        const LifStepResult rb = lif_update(spatial, b, p);
        for (std::size_t k = 0; k < s.size(); ++k)
            if (a.s.test(k))
                c.expect(ra.u[k] == rb.u[k] && ra.u[k] == spatial[k],
                         "potential after a spike depends on the previous potential");
    }
    return c.finish("u after a spike depends only on the spatial input");
}

CheckResult check_determinism(const SuiteOptions& opt) {
    Checker c("determinism");
    for (int i = 0; i < 10 && !c.failed(); ++i) {
        c.next_case();
        std::mt19937_64 r1(opt.seed + 100 + i);
        std::mt19937_64 r2(opt.seed + 100 + i);
        const Fixture f1 = random_fixture(r1, i % 2 == 0);
        const Fixture f2 = random_fixture(r2, i % 2 == 0);
        const StepResult a = train_step(f1.net, f1.weights, f1.batch, {});
        const StepResult b = train_step(f2.net, f2.weights, f2.batch, {});
        c.expect(a.weights == b.weights && a.loss == b.loss, "golden model is not reproducible");
        for (std::size_t g = 0; g < a.sub_batches.size(); ++g)
            for (std::size_t l = 0; l < a.sub_batches[g].forward.size(); ++l) {
                c.expect(a.sub_batches[g].forward[l].u == b.sub_batches[g].forward[l].u, "u not reproducible");
                c.expect(a.sub_batches[g].backward[l].grad_u == b.sub_batches[g].backward[l].grad_u,
                         "grad_u not reproducible");
            }
        const EngineStepResult e1 = engine_train_step(f1.net, f1.weights, f1.batch, 0.1);
        const EngineStepResult e2 = engine_train_step(f2.net, f2.weights, f2.batch, 0.1);
        c.expect(e1.weights == e2.weights && e1.loss == e2.loss, "engine model is not reproducible");
    }
    return c.finish("bit-identical reruns");
}

CheckResult check_lut_equivalence(const SuiteOptions& opt) {
    Checker c("lut-equivalence");
    std::mt19937_64 rng(opt.seed + 4);
    double worst = 0;
    for (int k : {1, 3, 5, 7})
        for (int i = 0; i < 40 && !c.failed(); ++i) {
            c.next_case();
            const bool integer_valued = i % 2 == 0;
            const ConvGeometry g = same_geometry(k, i % 4 == 3 ? 2 : 1);
            const int h = std::uniform_int_distribution<int>(1, 12)(rng);
            const int w = std::uniform_int_distribution<int>(1, 12)(rng);
            const BitPlane spikes = random_plane(rng, h, w, 0.5);
            const std::vector<Real> spike_values = plane_values(spikes);
            const std::vector<Real> kernel = random_values(rng, static_cast<std::size_t>(k) * k, integer_valued);
            const std::string tag = "k=" + std::to_string(k) + " stride=" + std::to_string(g.stride) + " " +
                                    std::to_string(h) + "x" + std::to_string(w);

            LutStats stats;
            const std::vector<Real> lut = lut_conv_forward(spikes, kernel, g, LutPeConfig::forward_default(),
                                                           Precision::fp32, &stats);
            c.expect(close(lut, direct_conv(spike_values, h, w, kernel, g), integer_valued, worst),
                     "LUT forward differs from direct conv, " + tag);

            const int oh = g.out_size(h);
            const int ow = g.out_size(w);
            const std::vector<Real> grad = random_values(rng, static_cast<std::size_t>(oh) * ow, integer_valued);
            const std::vector<Real> wg = lut_conv_weightgrad(spikes, grad, oh, ow, k, g,
                                                             LutPeConfig::weight_update_default(), Precision::fp32);
            c.expect(close(wg, direct_weightgrad(spike_values, h, w, grad, oh, ow, g), integer_valued, worst),
                     "LUT weight gradient differs from the direct loop, " + tag);

            // FC modes against a dense matrix-vector product.
            const int inputs = h * w;
            const int outputs = std::uniform_int_distribution<int>(1, 6)(rng);
            const std::vector<Real> matrix =
                random_values(rng, static_cast<std::size_t>(inputs) * outputs, integer_valued);
            BitPlane flat(1, inputs);
            for (int e = 0; e < inputs; ++e) flat.set(static_cast<std::size_t>(e), spikes.test(static_cast<std::size_t>(e)));
            std::vector<double> mv(static_cast<std::size_t>(outputs), 0.0);
            for (int e = 0; e < inputs; ++e)
                for (int o = 0; o < outputs; ++o)
                    mv[static_cast<std::size_t>(o)] +=
                        spike_values[static_cast<std::size_t>(e)] * matrix[static_cast<std::size_t>(e) * outputs + o];
            c.expect(close(fc_lut_mode(flat, matrix, outputs), mv, integer_valued, worst), "FC LUT mode, " + tag);

            const std::vector<Real> gu = random_values(rng, static_cast<std::size_t>(outputs), integer_valued);
            std::vector<Real> gw(static_cast<std::size_t>(inputs) * outputs, 0);
            fc_lut_weightgrad(flat, gu, gw);
            std::vector<double> outer(gw.size(), 0.0);
            for (int e = 0; e < inputs; ++e)
                for (int o = 0; o < outputs; ++o)
                    outer[static_cast<std::size_t>(e) * outputs + o] =
                        spike_values[static_cast<std::size_t>(e)] * gu[static_cast<std::size_t>(o)];
            c.expect(close(gw, outer, integer_valued, worst), "FC LUT weight-update mode, " + tag);
        }
    return c.finish("k in {1,3,5,7}, float max rel err " + fmt(worst));
}

CheckResult check_compression_roundtrip(const SuiteOptions& opt) {
    Checker c("compression-roundtrip");
    std::mt19937_64 rng(opt.seed + 5);
    std::uniform_real_distribution<double> dist(-1.0, 2.0);
    for (int i = 0; i < 300 && !c.failed(); ++i) {
        c.next_case();
        LifParams p;
        const int h = std::uniform_int_distribution<int>(1, 16)(rng);
        const int w = std::uniform_int_distribution<int>(1, 16)(rng);
        std::vector<Real> u(static_cast<std::size_t>(h) * w);
        for (auto& v : u) v = static_cast<Real>(dist(rng));
        if (!u.empty()) u[0] = static_cast<Real>(p.th_r);  // boundary value is not stored
        const CompressedPotentialTile cu = compress_potential(u, h, w, p);
        c.expect(cu.mask.popcount() == cu.values.size(), "stored value count differs from the mask popcount");
        const std::vector<Real> back = cu.decompress();
        for (std::size_t k = 0; k < u.size(); ++k) {
            const bool valid = p.in_window(u[k]);
            c.expect(cu.mask.test(k) == valid, "mask bit does not follow the window rule");
            c.expect(back[k] == (valid ? u[k] : 0.0f), "decompressed value differs");
        }
        if (!cu.values.empty()) {
            CompressedPotentialTile bad = cu;
            bad.values.pop_back();
            bool thrown = false;
            try {
                bad.check();
            } catch (const CorruptedStateError&) {
                thrown = true;
            }
            c.expect(thrown, "a truncated tile was not detected");
        }
    }
    return c.finish("lossless on the valid support");
}

CheckResult check_sparse_work_accounting(const SuiteOptions& opt) {
    Checker c("sparse-work-accounting");
    std::mt19937_64 rng(opt.seed + 6);
    std::uint64_t total = 0;
    for (int i = 0; i < opt.tiles && !c.failed(); ++i) {
        c.next_case();
        const TileCase tc = random_tile(rng);
        const ConvGeometry& g = tc.geom;
        const int ih = tc.in_mask.height();
        const int iw = tc.in_mask.width();
        const std::uint64_t expected = brute_force_tasks(tc.out_mask, tc.in_mask, g);

        // Gradient plane supported exactly on the input mask.
        std::vector<Real> grad = random_values(rng, tc.in_mask.size(), true);
        for (std::size_t k = 0; k < grad.size(); ++k) {
            if (!tc.in_mask.test(k)) grad[k] = 0;
            else if (grad[k] == 0) grad[k] = 0.5f;
        }
        const std::vector<Real> kernel = random_values(rng, static_cast<std::size_t>(g.k) * g.k, true);

        BackwardStats stats;
        const auto buffers = split_output_ids(tc.out_mask, 2, &stats);
        const auto tasks = generate_tasks(buffers, tc.in_mask, g, &stats);
        const std::vector<Real> ps =
            sparse_conv_execute(tasks, kernel, g, grad, ih, iw, tc.h, tc.w, Precision::fp32, &stats);
        c.expect(stats.finder_tasks == expected, "task count " + std::to_string(stats.finder_tasks) +
                                                     " vs brute force " + std::to_string(expected));
        c.expect(stats.macs == expected, "MAC count " + std::to_string(stats.macs) + " vs brute force " +
                                             std::to_string(expected));
        total += expected;

        // Dense transposed conv restricted to the valid outputs.
        std::vector<double> dense(static_cast<std::size_t>(tc.h) * tc.w, 0.0);
        for (int oy = 0; oy < ih; ++oy)
            for (int ox = 0; ox < iw; ++ox)
                for (int ky = 0; ky < g.k; ++ky)
                    for (int kx = 0; kx < g.k; ++kx) {
                        const int y = oy * g.stride - g.pad + ky;
                        const int x = ox * g.stride - g.pad + kx;
                        if (y < 0 || x < 0 || y >= tc.h || x >= tc.w || !tc.out_mask.get(y, x)) continue;
                        dense[static_cast<std::size_t>(y) * tc.w + x] +=
                            static_cast<double>(kernel[static_cast<std::size_t>(ky) * g.k + kx]) *
                            grad[static_cast<std::size_t>(oy) * iw + ox];
                    }
        c.expect(exactly_equal(ps, dense), "sparse result differs from the dense transposed conv");
    }
    return c.finish(std::to_string(total) + " tasks matched the brute-force count");
}

CheckResult check_buffer_balance(const SuiteOptions& opt) {
    Checker c("buffer-balance");
    std::mt19937_64 rng(opt.seed + 7);
    for (int i = 0; i < opt.tiles && !c.failed(); ++i) {
        c.next_case();
        const TileCase tc = random_tile(rng);
        const auto buffers = split_output_ids(tc.out_mask, 2);
        const auto a = buffers[0].ids.size();
        const auto b = buffers[1].ids.size();
        c.expect((a > b ? a - b : b - a) <= 1, "buffer sizes " + std::to_string(a) + " and " + std::to_string(b));
        c.expect(a + b == tc.out_mask.popcount(), "buffers do not cover every valid output");
    }
    return c.finish("|buf0 - buf1| <= 1 on every tile");
}

CheckResult check_task_monotonicity(const SuiteOptions& opt) {
    Checker c("task-monotonicity");
    std::mt19937_64 rng(opt.seed + 8);
    for (int i = 0; i < opt.tiles && !c.failed(); ++i) {
        c.next_case();
        TileCase tc = random_tile(rng);
        const std::uint64_t before = count_tasks(tc.out_mask, tc.in_mask, tc.geom);
        BitPlane& target = (i % 2 == 0) ? tc.out_mask : tc.in_mask;
        target.set(static_cast<std::size_t>(rng() % target.size()));
        const std::uint64_t after = count_tasks(tc.out_mask, tc.in_mask, tc.geom);
        c.expect(after >= before, "task count fell from " + std::to_string(before) + " to " + std::to_string(after));
    }
    return c.finish("adding a mask bit never removed a task");
}

}  // namespace h2sim::verify
