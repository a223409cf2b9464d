#pragma once

#include <vector>

#include "h2sim/lut_engine.hpp"
#include "h2sim/model.hpp"
#include "h2sim/sparse_backward.hpp"

namespace h2sim {

/// Counters of one weight layer as seen by the three engines: the forward
/// pass of the layer (FE), the backward pass producing its potential
/// gradient (BE) and its weight gradient (WUE).
struct EngineLayerStats {
    LutStats forward;
    BackwardStats backward;
    LutStats weight_update;
};

struct EngineOptions {
    LutPeConfig fe_lut = LutPeConfig::forward_default();
    LutPeConfig wue_lut = LutPeConfig::weight_update_default();
    int finder_buffers = 2;
    Precision precision = Precision::fp32;
};

struct EngineSubBatch {
    std::vector<LayerForward> forward;
    std::vector<LayerBackward> backward;
    double loss_sum = 0;
    std::vector<EngineLayerStats> stats;
};

struct EngineStepResult {
    Weights weights;
    double loss = 0;
    std::vector<EngineSubBatch> sub_batches;
};

/// One sub-batch through the engine-level functional models (LUT forward
/// with Soma compression, finder-driven sparse backward, LUT weight update).
/// `input` is already expanded to (n, T, C, H, W).
EngineSubBatch engine_run_sub_batch(const NetworkSpec& net, const NetworkPlan& plan, const Weights& weights,
                                    const ActivationTensor& input, std::span<const int> labels,
                                    const EngineOptions& options = {});

/// Same contract as train_step, computed by the engine models.
EngineStepResult engine_train_step(const NetworkSpec& net, const Weights& weights, const Batch& batch,
                                   double learning_rate, const EngineOptions& options = {});

}  // namespace h2sim
