#include "h2sim/lif.hpp"

#include <cmath>
#include <string>

namespace h2sim {

void LifParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("lif: alpha must lie in (0, 1]");
    if (!(th_l < th_r)) throw ConfigError("lif: th_l must be below th_r");
    if (!(beta > 0.0)) throw ConfigError("lif: beta must be positive");
    if (!std::isfinite(th_f) || !std::isfinite(th_l) || !std::isfinite(th_r))
        throw ConfigError("lif: thresholds must be finite");
}

void ConvGeometry::validate() const {
    if (k < 1) throw ConfigError("conv: kernel must be >= 1");
    if (stride < 1) throw ConfigError("conv: stride must be >= 1");
    if (pad < 0) throw ConfigError("conv: padding must be >= 0");
}

namespace {

Shape flatten(const Shape& s) { return {s.n, s.t, s.c * s.h * s.w, 1, 1}; }

Shape effective_input(const WeightOp& op, const Shape& in) {
    return op.kind == WeightKind::fc ? flatten(in) : in;
}

void require_finite(const WeightTensor& w) {
    if (!w.all_finite()) throw DataError("weights contain non-finite values");
}

Real q(Real x, Precision p) { return quantize(x, p); }

}  // namespace

Shape WeightOp::output_shape(const Shape& in, int out_channels) const {
    const Shape eff = effective_input(*this, in);
    geom.validate();
    const int ho = geom.out_size(eff.h);
    const int wo = geom.out_size(eff.w);
    if (ho < 1 || wo < 1) throw ConfigError("conv: kernel larger than padded input " + in.to_string());
    return {in.n, in.t, out_channels, ho, wo};
}

void WeightOp::check_weights(const Shape& in, const WeightTensor& w) const {
    const Shape eff = effective_input(*this, in);
    if (w.kernel() != geom.k || w.in_channels() != eff.c)
        throw ConfigError("weights (k=" + std::to_string(w.kernel()) + ", cin=" + std::to_string(w.in_channels()) +
                          ") do not fit input " + in.to_string());
}

ActivationTensor weight_forward(const ActivationTensor& in, const WeightTensor& w, const WeightOp& op,
                                Precision precision) {
    op.check_weights(in.shape(), w);
    require_finite(w);
    const Shape is = effective_input(op, in.shape());
    const Shape os = op.output_shape(in.shape(), w.out_channels());
    const ConvGeometry& g = op.geom;
    ActivationTensor out(os);
    for (int n = 0; n < is.n; ++n)
        for (int t = 0; t < is.t; ++t)
            for (int co = 0; co < os.c; ++co)
                for (int ci = 0; ci < is.c; ++ci) {
                    const std::size_t ibase = is.plane_offset(n, t, ci);
                    for (int oy = 0; oy < os.h; ++oy)
                        for (int ox = 0; ox < os.w; ++ox) {
                            Real acc = 0;
                            for (int ky = 0; ky < g.k; ++ky) {
                                const int iy = oy * g.stride - g.pad + ky;
                                if (iy < 0 || iy >= is.h) continue;
                                for (int kx = 0; kx < g.k; ++kx) {
                                    const int ix = ox * g.stride - g.pad + kx;
                                    if (ix < 0 || ix >= is.w) continue;
                                    const Real x = in[ibase + static_cast<std::size_t>(iy) * is.w + ix];
                                    if (x == 0) continue;
                                    acc = q(acc + q(x * w.at(ky, kx, ci, co), precision), precision);
                                }
                            }
                            Real& o = out.at(n, t, co, oy, ox);
                            o = q(o + acc, precision);
                        }
                }
    return out;
}

GradTensor weight_backward_input(const GradTensor& grad_out, const WeightTensor& w, const WeightOp& op,
                                 const Shape& in_shape, Precision precision) {
    op.check_weights(in_shape, w);
    require_finite(w);
    const Shape is = effective_input(op, in_shape);
    const Shape os = op.output_shape(in_shape, w.out_channels());
    require_shape(grad_out.shape(), os, "weight_backward_input gradient");
    const ConvGeometry& g = op.geom;
    GradTensor out(in_shape);
    for (int n = 0; n < os.n; ++n)
        for (int t = 0; t < os.t; ++t)
            for (int ci = 0; ci < is.c; ++ci) {
                const std::size_t ibase = is.plane_offset(n, t, ci);
                for (int co = 0; co < os.c; ++co)
                    for (int oy = 0; oy < os.h; ++oy)
                        for (int ox = 0; ox < os.w; ++ox) {
                            const Real gv = grad_out.at(n, t, co, oy, ox);
                            if (gv == 0) continue;
                            for (int ky = 0; ky < g.k; ++ky) {
                                const int iy = oy * g.stride - g.pad + ky;
                                if (iy < 0 || iy >= is.h) continue;
                                for (int kx = 0; kx < g.k; ++kx) {
                                    const int ix = ox * g.stride - g.pad + kx;
                                    if (ix < 0 || ix >= is.w) continue;
                                    Real& o = out[ibase + static_cast<std::size_t>(iy) * is.w + ix];
                                    o = q(o + q(gv * w.at(ky, kx, ci, co), precision), precision);
                                }
                            }
                        }
            }
    return out;
}

WeightTensor weight_gradient(const GradTensor& grad_out, const ActivationTensor& in, const WeightOp& op,
                             Precision precision) {
    const Shape is = effective_input(op, in.shape());
    const ConvGeometry& g = op.geom;
    const Shape& os = grad_out.shape();
    if (os.n != is.n || os.t != is.t) throw ConfigError("weight_gradient: sample/timestep extents differ");
    const Shape expected = op.output_shape(in.shape(), os.c);
    require_shape(os, expected, "weight_gradient gradient");
    WeightTensor gw(g.k, is.c, os.c);
    for (int n = 0; n < os.n; ++n)
        for (int t = 0; t < os.t; ++t)
            for (int co = 0; co < os.c; ++co)
                for (int oy = 0; oy < os.h; ++oy)
                    for (int ox = 0; ox < os.w; ++ox) {
                        const Real gv = grad_out.at(n, t, co, oy, ox);
                        if (gv == 0) continue;
                        for (int ci = 0; ci < is.c; ++ci) {
                            const std::size_t ibase = is.plane_offset(n, t, ci);
                            for (int ky = 0; ky < g.k; ++ky) {
                                const int iy = oy * g.stride - g.pad + ky;
                                if (iy < 0 || iy >= is.h) continue;
                                for (int kx = 0; kx < g.k; ++kx) {
                                    const int ix = ox * g.stride - g.pad + kx;
                                    if (ix < 0 || ix >= is.w) continue;
                                    const Real x = in[ibase + static_cast<std::size_t>(iy) * is.w + ix];
                                    if (x == 0) continue;
                                    Real& o = gw.at(ky, kx, ci, co);
                                    o = q(o + q(gv * x, precision), precision);
                                }
                            }
                        }
                    }
    return gw;
}

WeightTensor weight_gradient(const GradTensor& grad_out, const SpikeTensor& in, const WeightOp& op,
                             Precision precision) {
    return weight_gradient(grad_out, to_activation(in), op, precision);
}

LifStepResult lif_update(const ActivationTensor& spatial, const LifState& state, const LifParams& p,
                         Precision precision) {
    p.validate();
    const Shape& s = spatial.shape();
    require_shape(state.u.shape(), s, "lif state potential");
    require_shape(state.s.shape(), s, "lif state spikes");
    LifStepResult r{SpikeTensor(s), PotentialTensor(s), MaskTensor(s, MaskKind::spike_grad)};
    const Real alpha = static_cast<Real>(p.alpha);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Real temporal = state.s.test(i) ? Real{0} : q(alpha * state.u[i], precision);
        const Real u = q(temporal + spatial[i], precision);
        if (!std::isfinite(u)) throw DataError("lif: potential became non-finite");
        r.u[i] = u;
        if (u >= p.th_f) r.s.set(i);
        if (p.in_window(u)) r.mask.set(i);
    }
    return r;
}

LifStepResult lif_forward_layer(const SpikeTensor& s_in, const LifState& state, const WeightTensor& w,
                                const WeightOp& op, const LifParams& p, Precision precision) {
    return lif_forward_layer(to_activation(s_in), state, w, op, p, precision);
}

LifStepResult lif_forward_layer(const ActivationTensor& x_in, const LifState& state, const WeightTensor& w,
                                const WeightOp& op, const LifParams& p, Precision precision) {
    if (x_in.shape().t != 1) throw ConfigError("lif_forward_layer expects a single timestep");
    return lif_update(weight_forward(x_in, w, op, precision), state, p, precision);
}

BackwardStepResult backward_from_spatial(const GradTensor& grad_u_next, const PotentialTensor& u,
                                         const GradTensor& spatial, const SpikeTensor& s, const LifParams& p,
                                         Precision precision) {
    p.validate();
    const Shape& sh = u.shape();
    require_shape(grad_u_next.shape(), sh, "backward next-timestep gradient");
    require_shape(spatial.shape(), sh, "backward spatial term");
    require_shape(s.shape(), sh, "backward spikes");
    BackwardStepResult r{GradTensor(sh), GradTensor(sh), MaskTensor(sh, MaskKind::potential_grad)};
    const Real alpha = static_cast<Real>(p.alpha);
    for (std::size_t i = 0; i < sh.size(); ++i) {
        const Real gn = grad_u_next[i];
        const Real gs = q(q(gn * q(-alpha * u[i], precision), precision) + spatial[i], precision);
        const Real keep = s.test(i) ? Real{0} : q(gn * alpha, precision);
        const Real fd = static_cast<Real>(fire_derivative(u[i], p));
        const Real gu = q(keep + q(gs * fd, precision), precision);
        r.grad_s[i] = gs;
        r.grad_u[i] = gu;
        if (gu != 0) r.mask.set(i);
    }
    return r;
}

BackwardStepResult backward_layer(const GradTensor& grad_u_next, const PotentialTensor& u,
                                  const GradTensor& grad_u_upper, const WeightTensor& w_upper,
                                  const WeightOp& op_upper, const SpikeTensor& s, const LifParams& p,
                                  Precision precision) {
    const GradTensor spatial = weight_backward_input(grad_u_upper, w_upper, op_upper, u.shape(), precision);
    return backward_from_spatial(grad_u_next, u, spatial, s, p, precision);
}

MaskTensor spike_grad_mask(const PotentialTensor& u, const LifParams& p) {
    MaskTensor m(u.shape(), MaskKind::spike_grad);
    for (std::size_t i = 0; i < u.size(); ++i)
        if (p.in_window(u[i])) m.set(i);
    return m;
}

MaskTensor potential_grad_mask(const GradTensor& grad_u) {
    MaskTensor m(grad_u.shape(), MaskKind::potential_grad);
    for (std::size_t i = 0; i < grad_u.size(); ++i)
        if (grad_u[i] != 0) m.set(i);
    return m;
}

namespace {

Shape pooled_shape(const Shape& s, int pool) {
    if (pool < 1) throw ConfigError("avg_pool: pool size must be >= 1");
    return {s.n, s.t, s.c, pooled_size(s.h, pool), pooled_size(s.w, pool)};
}

}  // namespace

ActivationTensor avg_pool_forward(const ActivationTensor& x, int pool) {
    const Shape& is = x.shape();
    const Shape os = pooled_shape(is, pool);
    ActivationTensor out(os);
    const Real scale = Real{1} / static_cast<Real>(pool * pool);
    for (int n = 0; n < is.n; ++n)
        for (int t = 0; t < is.t; ++t)
            for (int c = 0; c < is.c; ++c)
                for (int oy = 0; oy < os.h; ++oy)
                    for (int ox = 0; ox < os.w; ++ox) {
                        Real sum = 0;
                        for (int dy = 0; dy < pool; ++dy)
                            for (int dx = 0; dx < pool; ++dx) {
                                const int iy = oy * pool + dy;
                                const int ix = ox * pool + dx;
                                if (iy < is.h && ix < is.w) sum += x.at(n, t, c, iy, ix);
                            }
                        out.at(n, t, c, oy, ox) = sum * scale;
                    }
    return out;
}

GradTensor avg_pool_backward(const GradTensor& grad, int pool, const Shape& in_shape) {
    require_shape(grad.shape(), pooled_shape(in_shape, pool), "avg_pool_backward gradient");
    GradTensor out(in_shape);
    const Real scale = Real{1} / static_cast<Real>(pool * pool);
    for (int n = 0; n < in_shape.n; ++n)
        for (int t = 0; t < in_shape.t; ++t)
            for (int c = 0; c < in_shape.c; ++c)
                for (int iy = 0; iy < in_shape.h; ++iy)
                    for (int ix = 0; ix < in_shape.w; ++ix)
                        out.at(n, t, c, iy, ix) = grad.at(n, t, c, iy / pool, ix / pool) * scale;
    return out;
}

MaskTensor pool_or_mask(const MaskTensor& mask, int pool) {
    const Shape& is = mask.shape();
    MaskTensor out(pooled_shape(is, pool), mask.kind());
    const Shape& os = out.shape();
    for (int n = 0; n < is.n; ++n)
        for (int t = 0; t < is.t; ++t)
            for (int c = 0; c < is.c; ++c)
                for (int iy = 0; iy < is.h; ++iy)
                    for (int ix = 0; ix < is.w; ++ix)
                        if (mask.test(n, t, c, iy, ix)) out.set(os.index(n, t, c, iy / pool, ix / pool));
    return out;
}

LossResult loss_and_output_gradient(const SpikeTensor& s_out, const PotentialTensor& u_out,
                                    std::span<const int> labels, const LifParams& p) {
    const Shape& s = s_out.shape();
    require_shape(u_out.shape(), s, "loss potentials");
    if (s.h != 1 || s.w != 1) throw ConfigError("loss: output layer must be fully connected");
    if (static_cast<int>(labels.size()) != s.n)
        throw DataError("loss: expected " + std::to_string(s.n) + " labels, got " + std::to_string(labels.size()));
    LossResult r{0.0, GradTensor(s), GradTensor(s)};
    const double inv_t = 1.0 / s.t;
    double total = 0.0;
    for (int n = 0; n < s.n; ++n) {
        const int label = labels[static_cast<std::size_t>(n)];
        if (label < 0 || label >= s.c)
            throw DataError("loss: label " + std::to_string(label) + " out of range [0, " + std::to_string(s.c) + ")");
        for (int c = 0; c < s.c; ++c) {
            int fired = 0;
            for (int t = 0; t < s.t; ++t) fired += s_out.test(n, t, c, 0, 0) ? 1 : 0;
            const double diff = fired * inv_t - (c == label ? 1.0 : 0.0);
            total += diff * diff;
            const Real g = static_cast<Real>(2.0 * inv_t * diff);
            for (int t = 0; t < s.t; ++t) {
                r.grad_s.at(n, t, c, 0, 0) = g;
                r.seed_grad_u.at(n, t, c, 0, 0) =
                    g * static_cast<Real>(fire_derivative(u_out.at(n, t, c, 0, 0), p));
            }
        }
    }
    r.loss = s.n > 0 ? total / s.n : 0.0;
    return r;
}

}  // namespace h2sim
