#pragma once

#include <span>

#include "h2sim/fp16.hpp"
#include "h2sim/tensor.hpp"

namespace h2sim {

struct LifParams {
    double alpha = 0.5;
    double th_f = 0.5;
    double th_l = 0.0;
    double th_r = 1.0;
    double beta = 1.0;

    /// Throws ConfigError unless alpha in (0,1], th_l < th_r and beta > 0.
    void validate() const;
    bool in_window(double u) const noexcept { return th_l < u && u < th_r; }
};

/// Rectangular surrogate: beta strictly inside (th_l, th_r), 0 elsewhere.
inline double fire_derivative(double u, const LifParams& p) noexcept {
    return p.in_window(u) ? p.beta : 0.0;
}

struct ConvGeometry {
    int k = 3;
    int stride = 1;
    int pad = 1;

    int out_size(int in) const noexcept { return (in + 2 * pad - k) / stride + 1; }
    void validate() const;
    friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// "Same" padding used by network conv layers.
inline ConvGeometry same_geometry(int k, int stride = 1) { return {k, stride, (k - 1) / 2}; }

enum class WeightKind { conv, fc };

/// How a weight tensor maps an input activation onto output neurons. FC
/// flattens (C,H,W) of the input and behaves like a 1x1 conv on a 1x1 map.
struct WeightOp {
    WeightKind kind = WeightKind::conv;
    ConvGeometry geom{};

    static WeightOp conv(ConvGeometry g) { return {WeightKind::conv, g}; }
    static WeightOp fc() { return {WeightKind::fc, ConvGeometry{1, 1, 0}}; }

    Shape output_shape(const Shape& in, int out_channels) const;
    /// Expected weight layout for the given input shape.
    void check_weights(const Shape& in, const WeightTensor& w) const;
};

/// Spatial sum for every (n, t) slice of `in`.
ActivationTensor weight_forward(const ActivationTensor& in, const WeightTensor& w, const WeightOp& op,
                                Precision precision = Precision::fp32);

/// Transposed operation: gradient w.r.t. the layer input (rotated kernel for
/// conv, W^T for FC). `in_shape` is the forward input shape.
GradTensor weight_backward_input(const GradTensor& grad_out, const WeightTensor& w, const WeightOp& op,
                                 const Shape& in_shape, Precision precision = Precision::fp32);

/// Sum over samples, timesteps and positions of grad_out x input.
WeightTensor weight_gradient(const GradTensor& grad_out, const ActivationTensor& in, const WeightOp& op,
                             Precision precision = Precision::fp32);
WeightTensor weight_gradient(const GradTensor& grad_out, const SpikeTensor& in, const WeightOp& op,
                             Precision precision = Precision::fp32);

struct LifState {
    PotentialTensor u;
    SpikeTensor s;

    static LifState zero(const Shape& shape) { return {PotentialTensor(shape), SpikeTensor(shape)}; }
};

struct LifStepResult {
    SpikeTensor s;
    PotentialTensor u;
    MaskTensor mask;
};

/// Temporal update and firing given a complete spatial sum (one timestep).
LifStepResult lif_update(const ActivationTensor& spatial, const LifState& state, const LifParams& p,
                         Precision precision = Precision::fp32);

LifStepResult lif_forward_layer(const SpikeTensor& s_in, const LifState& state, const WeightTensor& w,
                                const WeightOp& op, const LifParams& p, Precision precision = Precision::fp32);
LifStepResult lif_forward_layer(const ActivationTensor& x_in, const LifState& state, const WeightTensor& w,
                                const WeightOp& op, const LifParams& p, Precision precision = Precision::fp32);

struct BackwardStepResult {
    GradTensor grad_s;
    GradTensor grad_u;
    MaskTensor mask;
};

/// Both lines of the potential-gradient recursion given the spatial term of
/// the spike gradient.
BackwardStepResult backward_from_spatial(const GradTensor& grad_u_next, const PotentialTensor& u,
                                         const GradTensor& spatial, const SpikeTensor& s, const LifParams& p,
                                         Precision precision = Precision::fp32);

BackwardStepResult backward_layer(const GradTensor& grad_u_next, const PotentialTensor& u,
                                  const GradTensor& grad_u_upper, const WeightTensor& w_upper,
                                  const WeightOp& op_upper, const SpikeTensor& s, const LifParams& p,
                                  Precision precision = Precision::fp32);

MaskTensor spike_grad_mask(const PotentialTensor& u, const LifParams& p);
MaskTensor potential_grad_mask(const GradTensor& grad_u);

/// Pooled output size; partial blocks are zero padded.
inline int pooled_size(int in, int pool) noexcept { return (in + pool - 1) / pool; }

ActivationTensor avg_pool_forward(const ActivationTensor& x, int pool);
GradTensor avg_pool_backward(const GradTensor& grad, int pool, const Shape& in_shape);
/// A pooled position is set when any element of its block is set.
MaskTensor pool_or_mask(const MaskTensor& mask, int pool);

struct LossResult {
    /// Mean over samples of the per-sample squared rate error.
    double loss = 0;
    /// dL/ds_t for every output neuron and timestep (per-sample loss, not averaged).
    GradTensor grad_s;
    /// dL/ds_t * fire'(u_t).
    GradTensor seed_grad_u;
};

/// Rate-coded MSE against one-hot labels. s_out and u_out are (N, T, classes, 1, 1).
LossResult loss_and_output_gradient(const SpikeTensor& s_out, const PotentialTensor& u_out,
                                    std::span<const int> labels, const LifParams& p);

}  // namespace h2sim
