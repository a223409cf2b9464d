#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "h2sim/cycle_model.hpp"

namespace h2sim {

/// Bound cycles of one weight layer on each engine for one sub-batch.
struct LayerStageCycles {
    std::uint64_t forward = 0;
    std::uint64_t backward = 0;
    std::uint64_t weight_update = 0;
};

std::vector<LayerStageCycles> stage_cycles(const std::vector<LayerCycleReport>& layers);

/// Backward phase of one sub-batch: BE runs layers top-down, the WUE of a
/// layer starts once its potential gradient exists and the WUE is free.
struct BackwardTimeline {
    std::vector<std::uint64_t> be_finish;
    std::vector<std::uint64_t> wue_start;
    std::vector<std::uint64_t> wue_finish;
    std::uint64_t total = 0;
};
BackwardTimeline backward_timeline(std::span<const LayerStageCycles> layers);

struct ScheduleStage {
    int index = 0;
    std::uint64_t cycles = 0;
    /// "forward", "backward", "overlap" (both equal) or "weight_apply".
    std::string bound_by;
};

struct ScheduleReport {
    int batch_group = 1;
    /// Per sub-batch stage lengths.
    std::vector<std::uint64_t> forward;
    std::vector<std::uint64_t> backward;
    std::uint64_t weight_apply = 0;
    std::uint64_t total = 0;
    /// Same work without overlapping sub-batches: sum of FE + BW, plus apply.
    std::uint64_t sequential = 0;
    std::uint64_t fe_busy = 0;
    std::uint64_t be_busy = 0;
    std::uint64_t wue_busy = 0;
    double fe_utilization = 0;
    double be_utilization = 0;
    double wue_utilization = 0;
    /// Backward timeline of the last sub-batch.
    BackwardTimeline timeline;
    std::vector<ScheduleStage> stages;
};

/// One entry per sub-batch of the batch group, in order:
/// total = FE(1) + sum_{i<G} max(FE(i+1), BW(i)) + BW(G) + weight_apply.
ScheduleReport schedule_training_step(const std::vector<std::vector<LayerStageCycles>>& sub_batches,
                                      std::uint64_t weight_apply = 0);
/// Every sub-batch costing the same per-layer cycles.
ScheduleReport schedule_training_step(std::span<const LayerStageCycles> layers, int batch_group,
                                      std::uint64_t weight_apply = 0);

/// Cycles to apply the accumulated weight gradients once per batch group:
/// read w and grad w, write w, all FP16, over one memory space.
std::uint64_t weight_apply_cycles(const NetworkPlan& plan, const MemoryConfig& memory);

}  // namespace h2sim
