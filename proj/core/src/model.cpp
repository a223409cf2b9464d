#include "h2sim/model.hpp"

#include <cmath>
#include <random>
#include <string>

namespace h2sim {

Weights init_weights(const NetworkPlan& plan, std::uint64_t seed, double gain) {
    std::mt19937_64 rng(seed);
    Weights weights;
    for (int j = 0; j < plan.num_weight_layers(); ++j) {
        const ResolvedLayer& layer = plan.weight_layer(j);
        const int k = layer.op.geom.k;
        const int cin = layer.op.kind == WeightKind::fc ? layer.in.c * layer.in.h * layer.in.w : layer.in.c;
        WeightTensor w(k, cin, layer.out.c);
        const double bound = gain * std::sqrt(3.0 / (static_cast<double>(k) * k * cin));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : w.values()) v = static_cast<Real>(dist(rng));
        weights.push_back(std::move(w));
    }
    return weights;
}

void require_finite(const Weights& weights) {
    for (const auto& w : weights)
        if (!w.all_finite()) throw DataError("weights contain non-finite values");
}

ActivationTensor expand_input(const NetworkSpec& net, const ActivationTensor& input, int first, int count) {
    const Shape& s = input.shape();
    if (s.c != net.in_c || s.h != net.in_h || s.w != net.in_w)
        throw ConfigError("input " + s.to_string() + " does not match network input dims");
    if (s.t != 1 && s.t != net.timesteps) throw ConfigError("input must have 1 or T timesteps");
    if (first < 0 || count < 1 || first + count > s.n) throw ConfigError("input sample range out of bounds");
    ActivationTensor out(Shape{count, net.timesteps, s.c, s.h, s.w});
    const std::size_t block = static_cast<std::size_t>(s.c) * s.plane();
    for (int n = 0; n < count; ++n)
        for (int t = 0; t < net.timesteps; ++t) {
            const std::size_t from = s.index(first + n, s.t == 1 ? 0 : t, 0, 0, 0);
            const std::size_t to = out.shape().index(n, t, 0, 0, 0);
            for (std::size_t i = 0; i < block; ++i) out[to + i] = input[from + i];
        }
    return out;
}

std::vector<LayerForward> forward_pass(const NetworkSpec& net, const NetworkPlan& plan, const Weights& weights,
                                       const ActivationTensor& input, Precision precision) {
    if (static_cast<int>(weights.size()) != plan.num_weight_layers())
        throw ConfigError("expected " + std::to_string(plan.num_weight_layers()) + " weight tensors");
    require_finite(weights);
    const int nb = input.shape().n;
    const int steps = net.timesteps;
    require_shape(input.shape(), Shape{nb, steps, net.in_c, net.in_h, net.in_w}, "forward input");
    if (!plan.layers.front().real_input)
        for (Real v : input.values())
            if (v != 0 && v != 1) throw DataError("spike input must contain only 0 and 1");

    std::vector<LayerForward> records;
    ActivationTensor x = input;
    for (const ResolvedLayer& layer : plan.layers) {
        if (layer.spec.kind == LayerKind::avg_pool) {
            x = avg_pool_forward(x, layer.spec.pool);
            continue;
        }
        const WeightTensor& w = weights[static_cast<std::size_t>(layer.weight_index)];
        const Shape out{nb, steps, layer.out.c, layer.out.h, layer.out.w};
        LayerForward rec{x, !layer.real_input, PotentialTensor(out), SpikeTensor(out),
                         MaskTensor(out, MaskKind::spike_grad)};
        LifState state = LifState::zero(out.with_t(1));
        for (int t = 0; t < steps; ++t) {
            const ActivationTensor spatial = weight_forward(slice_t(x, t), w, layer.op, precision);
            LifStepResult step = lif_update(spatial, state, net.lif, precision);
            assign_t(rec.u, t, step.u);
            assign_t(rec.s, t, step.s);
            assign_t(rec.spike_grad_mask, t, step.mask);
            state.u = std::move(step.u);
            state.s = std::move(step.s);
        }
        x = to_activation(rec.s);
        records.push_back(std::move(rec));
    }
    return records;
}

GradTensor upper_spatial_gradient(const NetworkPlan& plan, const Weights& weights, int j,
                                  const GradTensor& grad_u_upper_t, int n, Precision precision) {
    const ResolvedLayer& upper = plan.weight_layer(j + 1);
    const Shape upper_in{n, 1, upper.in.c, upper.in.h, upper.in.w};
    GradTensor g = weight_backward_input(grad_u_upper_t, weights[static_cast<std::size_t>(j + 1)], upper.op,
                                         upper_in, precision);
    for (int i = plan.weight_layers[static_cast<std::size_t>(j + 1)] - 1; i > plan.weight_layers[static_cast<std::size_t>(j)];
         --i) {
        const ResolvedLayer& pool = plan.layers[static_cast<std::size_t>(i)];
        g = avg_pool_backward(g, pool.spec.pool, Shape{n, 1, pool.in.c, pool.in.h, pool.in.w});
    }
    return g;
}

std::vector<LayerBackward> backward_pass(const NetworkSpec& net, const NetworkPlan& plan, const Weights& weights,
                                         const std::vector<LayerForward>& forward, std::span<const int> labels,
                                         double& loss_sum, Precision precision) {
    const int layers = plan.num_weight_layers();
    if (static_cast<int>(forward.size()) != layers) throw ConfigError("forward record does not match the network");
    const LayerForward& top = forward.back();
    const LossResult loss = loss_and_output_gradient(top.s, top.u, labels, net.lif);
    loss_sum = loss.loss * top.s.shape().n;

    std::vector<LayerBackward> back(static_cast<std::size_t>(layers));
    for (int j = layers - 1; j >= 0; --j) {
        const LayerForward& fw = forward[static_cast<std::size_t>(j)];
        const Shape& shape = fw.u.shape();
        LayerBackward& rec = back[static_cast<std::size_t>(j)];
        rec.grad_s = GradTensor(shape);
        rec.grad_u = GradTensor(shape);
        rec.potential_grad_mask = MaskTensor(shape, MaskKind::potential_grad);
        GradTensor grad_next(shape.with_t(1));
        for (int t = shape.t - 1; t >= 0; --t) {
            const GradTensor spatial =
                j == layers - 1
                    ? slice_t(loss.grad_s, t)
                    : upper_spatial_gradient(plan, weights, j, slice_t(back[static_cast<std::size_t>(j + 1)].grad_u, t),
                                             shape.n, precision);
            BackwardStepResult step =
                backward_from_spatial(grad_next, slice_t(fw.u, t), spatial, slice_t(fw.s, t), net.lif, precision);
            assign_t(rec.grad_s, t, step.grad_s);
            assign_t(rec.grad_u, t, step.grad_u);
            assign_t(rec.potential_grad_mask, t, step.mask);
            grad_next = std::move(step.grad_u);
        }
        rec.grad_w = weight_gradient(rec.grad_u, fw.input, plan.weight_layer(j).op, precision);
    }
    return back;
}

Weights apply_sgd(const Weights& weights, const std::vector<Weights>& grads, double learning_rate, int batch) {
    if (batch < 1) throw ConfigError("sgd: batch must be >= 1");
    Weights out = weights;
    const double scale = learning_rate / batch;
    for (const Weights& g : grads) {
        if (g.size() != out.size()) throw ConfigError("sgd: gradient count mismatch");
        for (std::size_t j = 0; j < out.size(); ++j) {
            if (!g[j].same_layout(out[j])) throw ConfigError("sgd: gradient layout mismatch");
            for (std::size_t i = 0; i < out[j].size(); ++i)
                out[j][i] = static_cast<Real>(out[j][i] - scale * g[j][i]);
        }
    }
    require_finite(out);
    return out;
}

StepResult train_step(const NetworkSpec& net, const Weights& weights, const Batch& batch,
                      const TrainOptions& options) {
    const NetworkPlan plan = resolve(net);
    const int total = net.batch_size();
    if (batch.input.shape().n != total)
        throw ConfigError("batch holds " + std::to_string(batch.input.shape().n) + " samples, expected sub_batch x "
                          "batch_group = " + std::to_string(total));
    if (static_cast<int>(batch.labels.size()) != total) throw DataError("label count does not match batch size");
    if (!std::isfinite(options.learning_rate)) throw ConfigError("learning rate must be finite");

    StepResult result;
    std::vector<Weights> grads;
    double loss_total = 0;
    for (int g = 0; g < net.batch_group; ++g) {
        const int first = g * net.sub_batch;
        SubBatchRecord rec;
        const ActivationTensor input = expand_input(net, batch.input, first, net.sub_batch);
        rec.forward = forward_pass(net, plan, weights, input, options.precision);
        const std::span<const int> labels(batch.labels.data() + first, static_cast<std::size_t>(net.sub_batch));
        rec.backward = backward_pass(net, plan, weights, rec.forward, labels, rec.loss_sum, options.precision);
        loss_total += rec.loss_sum;
        Weights gw;
        for (const auto& b : rec.backward) gw.push_back(b.grad_w);
        grads.push_back(std::move(gw));
        result.sub_batches.push_back(std::move(rec));
    }
    result.weights = apply_sgd(weights, grads, options.learning_rate, total);
    result.loss = loss_total / total;
    return result;
}

}  // namespace h2sim
