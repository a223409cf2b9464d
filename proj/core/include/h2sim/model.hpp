#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "h2sim/network.hpp"

namespace h2sim {

using Weights = std::vector<WeightTensor>;

/// Uniform init in +/- gain * sqrt(3 / fan_in), seeded.
Weights init_weights(const NetworkPlan& plan, std::uint64_t seed, double gain = 1.0);
void require_finite(const Weights& weights);

struct Batch {
    /// (N, T or 1, C, H, W). A single timestep is replicated over T. For a
    /// non-encoding first layer the values must be 0 or 1.
    ActivationTensor input;
    std::vector<int> labels;
};

/// Recorded forward tensors of one weight layer over all timesteps.
struct LayerForward {
    /// Layer input after any pooling (spikes as 0/1 when binary).
    ActivationTensor input;
    bool binary_input = true;
    PotentialTensor u;
    SpikeTensor s;
    MaskTensor spike_grad_mask;
};

struct LayerBackward {
    /// Spike gradient, meaningful where the surrogate is nonzero.
    GradTensor grad_s;
    GradTensor grad_u;
    MaskTensor potential_grad_mask;
    WeightTensor grad_w;
};

struct SubBatchRecord {
    std::vector<LayerForward> forward;
    std::vector<LayerBackward> backward;
    /// Sum over the sub-batch samples of the per-sample loss.
    double loss_sum = 0;
};

struct TrainOptions {
    double learning_rate = 0.1;
    Precision precision = Precision::fp32;
};

struct StepResult {
    Weights weights;
    /// Mean per-sample loss over the whole batch.
    double loss = 0;
    std::vector<SubBatchRecord> sub_batches;
};

/// Expands the batch input to (n, T, C, H, W) for samples [first, first + count).
ActivationTensor expand_input(const NetworkSpec& net, const ActivationTensor& input, int first, int count);

std::vector<LayerForward> forward_pass(const NetworkSpec& net, const NetworkPlan& plan, const Weights& weights,
                                       const ActivationTensor& input, Precision precision = Precision::fp32);

/// Backward over all layers and timesteps; returns per-layer gradients and
/// the summed loss through `loss_sum`.
std::vector<LayerBackward> backward_pass(const NetworkSpec& net, const NetworkPlan& plan, const Weights& weights,
                                         const std::vector<LayerForward>& forward, std::span<const int> labels,
                                         double& loss_sum, Precision precision = Precision::fp32);

/// Spatial term of the spike gradient of weight layer j, given the upper
/// layer's potential gradient at one timestep (chained through any pooling).
GradTensor upper_spatial_gradient(const NetworkPlan& plan, const Weights& weights, int j,
                                  const GradTensor& grad_u_upper_t, int n, Precision precision);

/// w -= lr / batch * sum of the per-sub-batch weight gradients.
Weights apply_sgd(const Weights& weights, const std::vector<Weights>& grads, double learning_rate, int batch);

StepResult train_step(const NetworkSpec& net, const Weights& weights, const Batch& batch,
                      const TrainOptions& options = {});

}  // namespace h2sim
