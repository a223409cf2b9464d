#include "h2sim/engine_model.hpp"

#include <algorithm>
#include <optional>
#include <string>

namespace h2sim {

namespace {

template <typename Tensor>
std::vector<Real> copy_plane(const Tensor& x, int n, int t, int c) {
    const auto view = plane_view(x, n, t, c);
    return {view.begin(), view.end()};
}

/// Whole (C, H, W) block of one (n, t) slice, flattened.
template <typename Tensor>
std::vector<Real> copy_flat(const Tensor& x, int n, int t) {
    const Shape& s = x.shape();
    const std::size_t block = static_cast<std::size_t>(s.c) * s.plane();
    const auto all = x.values().subspan(s.plane_offset(n, t, 0), block);
    return {all.begin(), all.end()};
}

BitPlane nonzero_plane(std::span<const Real> values, int h, int w) {
    BitPlane plane(h, w);
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] != 0) plane.set(i);
    return plane;
}

template <typename Tag>
void write_plane(DenseTensor<Tag>& dst, int n, int t, int c, std::span<const Real> src) {
    auto view = plane_view(dst, n, t, c);
    std::copy(src.begin(), src.end(), view.begin());
}

std::size_t slot(const Shape& s, int n, int t, int c) { return (static_cast<std::size_t>(n) * s.t + t) * s.c + c; }

struct ForwardState {
    LayerForward record;
    /// Compressed potentials per (n, t, c); absent for FC layers.
    std::vector<std::optional<CompressedPotentialTile>> compressed;
};

int flat_inputs(const ResolvedLayer& layer) {
    return layer.op.kind == WeightKind::fc ? layer.in.c * layer.in.h * layer.in.w : layer.in.c;
}

ForwardState forward_layer(const ResolvedLayer& layer, const WeightTensor& w, const ActivationTensor& x,
                           const LifParams& lif, const EngineOptions& opt, LutStats& stats) {
    const Shape& is = x.shape();
    const Shape os{is.n, is.t, layer.out.c, layer.out.h, layer.out.w};
    layer.op.check_weights(is, w);
    ForwardState st;
    st.record = LayerForward{x, !layer.real_input, PotentialTensor(os), SpikeTensor(os),
                             MaskTensor(os, MaskKind::spike_grad)};
    st.compressed.resize(static_cast<std::size_t>(os.n) * os.t * os.c);
    const bool fc = layer.op.kind == WeightKind::fc;
    const bool binary = !layer.real_input;
    const int cin = flat_inputs(layer);

    std::vector<KernelLuts> luts;
    if (!fc && binary) {
        luts.reserve(static_cast<std::size_t>(cin) * os.c);
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < os.c; ++co)
                luts.push_back(build_kernel_luts(w.kernel_slice(ci, co), w.kernel(), opt.fe_lut, opt.precision, &stats));
    }

    for (int n = 0; n < os.n; ++n) {
        if (fc) {
            std::vector<Real> u_prev(static_cast<std::size_t>(os.c), 0);
            BitPlane s_prev(1, os.c);
            for (int t = 0; t < os.t; ++t) {
                const std::vector<Real> in = copy_flat(x, n, t);
                std::vector<Real> sums;
                if (binary) {
                    sums = fc_lut_mode(nonzero_plane(in, 1, cin), w.values(), os.c, opt.precision, &stats);
                } else {
                    sums.assign(static_cast<std::size_t>(os.c), 0);
                    for (int co = 0; co < os.c; ++co) {
                        Real acc = 0;
                        for (int ci = 0; ci < cin; ++ci)
                            acc = quantize(acc + quantize(in[static_cast<std::size_t>(ci)] * w.at(0, 0, ci, co),
                                                          opt.precision),
                                           opt.precision);
                        sums[static_cast<std::size_t>(co)] = acc;
                    }
                    stats.macs += static_cast<std::uint64_t>(cin) * os.c;
                }
                PartialSumTile ps(1, os.c, 1);
                ps.accumulate(sums, opt.precision);
                SomaResult r = soma(ps, u_prev, s_prev, lif, true, opt.precision, &stats);
                for (int co = 0; co < os.c; ++co) {
                    const auto i = static_cast<std::size_t>(co);
                    st.record.u.at(n, t, co, 0, 0) = r.u[i];
                    if (r.spikes.test(i)) st.record.s.set(os.index(n, t, co, 0, 0));
                    if (r.mask.test(i)) st.record.spike_grad_mask.set(os.index(n, t, co, 0, 0));
                }
                u_prev = std::move(r.u);
                s_prev = std::move(r.spikes);
            }
            continue;
        }
        std::vector<std::vector<Real>> u_prev(static_cast<std::size_t>(os.c), std::vector<Real>(os.plane(), 0));
        std::vector<BitPlane> s_prev(static_cast<std::size_t>(os.c), BitPlane(os.h, os.w));
        for (int t = 0; t < os.t; ++t) {
            std::vector<BitPlane> in_bits;
            std::vector<std::vector<Real>> in_real;
            for (int ci = 0; ci < cin; ++ci) {
                if (binary)
                    in_bits.push_back(nonzero_plane(plane_view(x, n, t, ci), is.h, is.w));
                else
                    in_real.push_back(copy_plane(x, n, t, ci));
            }
            for (int co = 0; co < os.c; ++co) {
                PartialSumTile ps(os.h, os.w, cin);
                for (int ci = 0; ci < cin; ++ci) {
                    const auto c = static_cast<std::size_t>(ci);
                    const std::vector<Real> contribution =
                        binary ? lut_conv_forward(in_bits[c], luts[c * os.c + co], layer.op.geom, opt.precision, &stats)
                               : dense_conv_forward(in_real[c], is.h, is.w, w.kernel_slice(ci, co), layer.op.geom,
                                                    opt.precision, &stats);
                    ps.accumulate(contribution, opt.precision);
                }
                const auto o = static_cast<std::size_t>(co);
                SomaResult r = soma(ps, u_prev[o], s_prev[o], lif, false, opt.precision, &stats);
                write_plane(st.record.u, n, t, co, r.u);
                store_plane(st.record.s, n, t, co, r.spikes);
                store_plane(st.record.spike_grad_mask, n, t, co, r.mask);
                st.compressed[slot(os, n, t, co)] = std::move(r.compressed);
                u_prev[o] = std::move(r.u);
                s_prev[o] = std::move(r.spikes);
            }
        }
    }
    return st;
}

/// Pool layers between weight layer j and j + 1, innermost (closest to j) first.
std::vector<const ResolvedLayer*> pools_between(const NetworkPlan& plan, int j) {
    std::vector<const ResolvedLayer*> pools;
    for (int i = plan.weight_layers[static_cast<std::size_t>(j)] + 1;
         i < plan.weight_layers[static_cast<std::size_t>(j + 1)]; ++i)
        pools.push_back(&plan.layers[static_cast<std::size_t>(i)]);
    return pools;
}

/// Spreads a gradient on the upper layer's input grid back through the pools
/// to layer j's grid. Returns per-channel planes.
std::vector<std::vector<Real>> spread_through_pools(GradTensor g, const std::vector<const ResolvedLayer*>& pools,
                                                    BackwardStats& stats) {
    for (auto it = pools.rbegin(); it != pools.rend(); ++it) {
        const ResolvedLayer& pool = **it;
        const Shape in{1, 1, pool.in.c, pool.in.h, pool.in.w};
        g = avg_pool_backward(g, pool.spec.pool, in);
        stats.pool_ops += in.size();
    }
    std::vector<std::vector<Real>> planes;
    for (int c = 0; c < g.shape().c; ++c) planes.push_back(copy_plane(g, 0, 0, c));
    return planes;
}

struct BackwardContext {
    const NetworkPlan& plan;
    const Weights& weights;
    const std::vector<ForwardState>& forward;
    const std::vector<LayerBackward>& back;
    const LifParams& lif;
    const EngineOptions& opt;
};

/// Spatial term of layer j's spike gradient at (n, t), one plane per channel.
/// Only positions inside the spike-grad mask are guaranteed to be valid.
std::vector<std::vector<Real>> spatial_term(const BackwardContext& ctx, int j, int n, int t,
                                            const LossResult* loss, BackwardStats& stats) {
    const LayerForward& fw = ctx.forward[static_cast<std::size_t>(j)].record;
    const Shape& os = fw.u.shape();
    if (loss != nullptr) {
        std::vector<std::vector<Real>> planes;
        for (int c = 0; c < os.c; ++c) planes.push_back(copy_plane(loss->grad_s, n, t, c));
        return planes;
    }
    const ResolvedLayer& upper = ctx.plan.weight_layer(j + 1);
    const WeightTensor& w = ctx.weights[static_cast<std::size_t>(j + 1)];
    const LayerBackward& ub = ctx.back[static_cast<std::size_t>(j + 1)];
    const Shape& us = ub.grad_u.shape();
    const auto pools = pools_between(ctx.plan, j);
    const Shape grid{1, 1, upper.in.c, upper.in.h, upper.in.w};

    if (upper.op.kind == WeightKind::fc) {
        const std::vector<Real> g = copy_flat(ub.grad_u, n, t);
        const std::vector<Real> ps =
            fc_backward_mode(g, w.values(), flat_inputs(upper), ctx.opt.precision, &stats);
        GradTensor flat(grid);
        std::copy(ps.begin(), ps.end(), flat.values().begin());
        return spread_through_pools(std::move(flat), pools, stats);
    }

    const ConvGeometry& geom = upper.op.geom;
    // Output masks live on the upper layer's input grid: the spike-grad mask
    // itself, or its pooled OR when pooling intervenes.
    MaskTensor out_mask = slice_t(fw.spike_grad_mask, t);
    for (const ResolvedLayer* pool : pools) out_mask = pool_or_mask(out_mask, pool->spec.pool);

    std::vector<BitPlane> in_masks;
    std::vector<std::vector<Real>> in_grads;
    for (int co = 0; co < us.c; ++co) {
        in_masks.push_back(extract_plane(ub.potential_grad_mask, n, t, co));
        in_grads.push_back(copy_plane(ub.grad_u, n, t, co));
    }

    GradTensor grid_ps(grid);
    for (int ci = 0; ci < grid.c; ++ci) {
        const BitPlane mask = extract_plane(out_mask, n, 0, ci);
        std::vector<OutputIdBuffer> buffers;
        const auto& cu = ctx.forward[static_cast<std::size_t>(j)].compressed[slot(os, n, t, ci)];
        if (pools.empty() && cu.has_value())
            buffers = effectual_output_finder(mask, *cu, ctx.opt.finder_buffers, &stats).buffers;
        else
            buffers = split_output_ids(mask, ctx.opt.finder_buffers, &stats);
        PartialSumTile ps(grid.h, grid.w, us.c);
        for (int co = 0; co < us.c; ++co) {
            const auto c = static_cast<std::size_t>(co);
            const auto tasks = generate_tasks(buffers, in_masks[c], geom, &stats);
            ps.accumulate(sparse_conv_execute(tasks, w.kernel_slice(ci, co), geom, in_grads[c], us.h, us.w, grid.h,
                                              grid.w, ctx.opt.precision, &stats),
                          ctx.opt.precision);
        }
        write_plane(grid_ps, 0, 0, ci, ps.values());
    }
    return spread_through_pools(std::move(grid_ps), pools, stats);
}

LayerBackward backward_layer_engine(const BackwardContext& ctx, int j, const LossResult* loss,
                                    BackwardStats& stats) {
    const ForwardState& fs = ctx.forward[static_cast<std::size_t>(j)];
    const Shape& os = fs.record.u.shape();
    LayerBackward rec;
    rec.grad_u = GradTensor(os);
    rec.potential_grad_mask = MaskTensor(os, MaskKind::potential_grad);
    for (int n = 0; n < os.n; ++n) {
        std::vector<std::vector<Real>> grad_next(static_cast<std::size_t>(os.c), std::vector<Real>(os.plane(), 0));
        for (int t = os.t - 1; t >= 0; --t) {
            const auto spatial = spatial_term(ctx, j, n, t, loss, stats);
            for (int c = 0; c < os.c; ++c) {
                const auto& cu = fs.compressed[slot(os, n, t, c)];
                const std::vector<Real> u_dense = cu.has_value() ? cu->decompress() : copy_plane(fs.record.u, n, t, c);
                GradUnitResult r = grad_unit(spatial[static_cast<std::size_t>(c)], u_dense,
                                             grad_next[static_cast<std::size_t>(c)],
                                             extract_plane(fs.record.s, n, t, c),
                                             extract_plane(fs.record.spike_grad_mask, n, t, c), ctx.lif,
                                             ctx.opt.precision, &stats);
                write_plane(rec.grad_u, n, t, c, r.grad_u);
                store_plane(rec.potential_grad_mask, n, t, c, r.mask);
                grad_next[static_cast<std::size_t>(c)] = std::move(r.grad_u);
            }
        }
    }
    return rec;
}

WeightTensor weight_update_layer(const ResolvedLayer& layer, const LayerForward& fw, const LayerBackward& bw,
                                 const EngineOptions& opt, LutStats& stats) {
    const Shape& is = fw.input.shape();
    const Shape& os = bw.grad_u.shape();
    const bool fc = layer.op.kind == WeightKind::fc;
    const int cin = flat_inputs(layer);
    const int k = layer.op.geom.k;
    WeightTensor gw(k, cin, os.c);
    for (int n = 0; n < os.n; ++n)
        for (int t = 0; t < os.t; ++t) {
            if (fc) {
                const std::vector<Real> in = copy_flat(fw.input, n, t);
                const std::vector<Real> g = copy_flat(bw.grad_u, n, t);
                if (fw.binary_input) {
                    fc_lut_weightgrad(nonzero_plane(in, 1, cin), g, gw.values(), opt.precision, &stats);
                } else {
                    for (int ci = 0; ci < cin; ++ci)
                        for (int co = 0; co < os.c; ++co) {
                            Real& o = gw.at(0, 0, ci, co);
                            o = quantize(o + quantize(in[static_cast<std::size_t>(ci)] * g[static_cast<std::size_t>(co)],
                                                      opt.precision),
                                         opt.precision);
                        }
                    stats.macs += static_cast<std::uint64_t>(cin) * os.c;
                }
                continue;
            }
            for (int ci = 0; ci < cin; ++ci) {
                const std::vector<Real> in = copy_plane(fw.input, n, t, ci);
                const BitPlane bits = nonzero_plane(in, is.h, is.w);
                for (int co = 0; co < os.c; ++co) {
                    const std::vector<Real> g = copy_plane(bw.grad_u, n, t, co);
                    const std::vector<Real> part =
                        fw.binary_input
                            ? lut_conv_weightgrad(bits, g, os.h, os.w, k, layer.op.geom, opt.wue_lut, opt.precision,
                                                  &stats)
                            : dense_conv_weightgrad(in, is.h, is.w, g, os.h, os.w, k, layer.op.geom, opt.precision,
                                                    &stats);
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            Real& o = gw.at(ky, kx, ci, co);
                            o = quantize(o + part[static_cast<std::size_t>(ky) * k + kx], opt.precision);
                        }
                }
            }
        }
    return gw;
}

}  // namespace

EngineSubBatch engine_run_sub_batch(const NetworkSpec& net, const NetworkPlan& plan, const Weights& weights,
                                    const ActivationTensor& input, std::span<const int> labels,
                                    const EngineOptions& options) {
    if (static_cast<int>(weights.size()) != plan.num_weight_layers())
        throw ConfigError("expected " + std::to_string(plan.num_weight_layers()) + " weight tensors");
    require_finite(weights);
    options.fe_lut.validate();
    options.wue_lut.validate();
    const int layers = plan.num_weight_layers();
    EngineSubBatch out;
    out.stats.resize(static_cast<std::size_t>(layers));

    std::vector<ForwardState> states;
    ActivationTensor x = input;
    if (!plan.layers.front().real_input)
        for (Real v : x.values())
            if (v != 0 && v != 1) throw DataError("spike input must contain only 0 and 1");
    for (const ResolvedLayer& layer : plan.layers) {
        if (layer.spec.kind == LayerKind::avg_pool) {
            out.stats[states.size() - 1].forward.pool_ops += x.size();
            x = avg_pool_forward(x, layer.spec.pool);
            continue;
        }
        auto& st = out.stats[static_cast<std::size_t>(layer.weight_index)];
        states.push_back(forward_layer(layer, weights[static_cast<std::size_t>(layer.weight_index)], x, net.lif,
                                       options, st.forward));
        x = to_activation(states.back().record.s);
    }

    const LayerForward& top = states.back().record;
    const LossResult loss = loss_and_output_gradient(top.s, top.u, labels, net.lif);
    out.loss_sum = loss.loss * top.s.shape().n;

    std::vector<LayerBackward> back(static_cast<std::size_t>(layers));
    const BackwardContext ctx{plan, weights, states, back, net.lif, options};
    for (int j = layers - 1; j >= 0; --j) {
        auto& st = out.stats[static_cast<std::size_t>(j)];
        back[static_cast<std::size_t>(j)] = backward_layer_engine(ctx, j, j == layers - 1 ? &loss : nullptr, st.backward);
        back[static_cast<std::size_t>(j)].grad_w =
            weight_update_layer(plan.weight_layer(j), states[static_cast<std::size_t>(j)].record,
                                back[static_cast<std::size_t>(j)], options, st.weight_update);
    }
    for (auto& s : states) out.forward.push_back(std::move(s.record));
    out.backward = std::move(back);
    return out;
}

EngineStepResult engine_train_step(const NetworkSpec& net, const Weights& weights, const Batch& batch,
                                   double learning_rate, const EngineOptions& options) {
    const NetworkPlan plan = resolve(net);
    const int total = net.batch_size();
    if (batch.input.shape().n != total) throw ConfigError("batch size must equal sub_batch x batch_group");
    if (static_cast<int>(batch.labels.size()) != total) throw DataError("label count does not match batch size");
    EngineStepResult result;
    std::vector<Weights> grads;
    double loss_total = 0;
    for (int g = 0; g < net.batch_group; ++g) {
        const int first = g * net.sub_batch;
        const ActivationTensor input = expand_input(net, batch.input, first, net.sub_batch);
        const std::span<const int> labels(batch.labels.data() + first, static_cast<std::size_t>(net.sub_batch));
        EngineSubBatch sb = engine_run_sub_batch(net, plan, weights, input, labels, options);
        loss_total += sb.loss_sum;
        Weights gw;
        for (const auto& b : sb.backward) gw.push_back(b.grad_w);
        grads.push_back(std::move(gw));
        result.sub_batches.push_back(std::move(sb));
    }
    result.weights = apply_sgd(weights, grads, learning_rate, total);
    result.loss = loss_total / total;
    return result;
}

}  // namespace h2sim
