#include "h2sim/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace h2sim {

std::vector<LayerStageCycles> stage_cycles(const std::vector<LayerCycleReport>& layers) {
    std::vector<LayerStageCycles> out;
    for (const LayerCycleReport& r : layers) out.push_back({r.forward.bound, r.backward.bound, r.weight_update.bound});
    return out;
}

BackwardTimeline backward_timeline(std::span<const LayerStageCycles> layers) {
    const std::size_t L = layers.size();
    BackwardTimeline tl;
    tl.be_finish.assign(L, 0);
    tl.wue_start.assign(L, 0);
    tl.wue_finish.assign(L, 0);
    std::uint64_t be = 0;
    std::uint64_t wue_free = 0;
    for (std::size_t i = L; i-- > 0;) {
        be += layers[i].backward;
        tl.be_finish[i] = be;
        tl.wue_start[i] = std::max(be, wue_free);
        tl.wue_finish[i] = tl.wue_start[i] + layers[i].weight_update;
        wue_free = tl.wue_finish[i];
    }
    tl.total = std::max(be, wue_free);
    return tl;
}

ScheduleReport schedule_training_step(const std::vector<std::vector<LayerStageCycles>>& sub_batches,
                                      std::uint64_t weight_apply) {
    if (sub_batches.empty()) throw ConfigError("schedule: batch group must be positive");
    ScheduleReport r;
    r.batch_group = static_cast<int>(sub_batches.size());
    for (const auto& layers : sub_batches) {
        if (layers.empty() || layers.size() != sub_batches.front().size())
            throw ConfigError("schedule: missing layer reports");
        r.timeline = backward_timeline(layers);
        std::uint64_t fe = 0;
        for (const LayerStageCycles& l : layers) {
            fe += l.forward;
            r.fe_busy += l.forward;
            r.be_busy += l.backward;
            r.wue_busy += l.weight_update;
        }
        r.forward.push_back(fe);
        r.backward.push_back(r.timeline.total);
    }
    r.weight_apply = weight_apply;

    const auto G = sub_batches.size();
    r.stages.push_back({0, r.forward[0], "forward"});
    for (std::size_t i = 1; i < G; ++i) {
        const std::uint64_t fe = r.forward[i];
        const std::uint64_t bw = r.backward[i - 1];
        const char* who = fe > bw ? "forward" : fe < bw ? "backward" : "overlap";
        r.stages.push_back({static_cast<int>(i), std::max(fe, bw), who});
    }
    r.stages.push_back({static_cast<int>(G), r.backward[G - 1], "backward"});
    if (weight_apply > 0) r.stages.push_back({static_cast<int>(G) + 1, weight_apply, "weight_apply"});
    for (const ScheduleStage& s : r.stages) r.total += s.cycles;
    r.sequential = weight_apply;
    for (std::size_t i = 0; i < G; ++i) r.sequential += r.forward[i] + r.backward[i];

    const auto util = [&](std::uint64_t busy) {
        return r.total == 0 ? 0.0 : static_cast<double>(busy) / static_cast<double>(r.total);
    };
    r.fe_utilization = util(r.fe_busy);
    r.be_utilization = util(r.be_busy);
    r.wue_utilization = util(r.wue_busy);
    return r;
}

ScheduleReport schedule_training_step(std::span<const LayerStageCycles> layers, int batch_group,
                                      std::uint64_t weight_apply) {
    if (batch_group < 1) throw ConfigError("schedule: batch group must be positive");
    const std::vector<std::vector<LayerStageCycles>> all(static_cast<std::size_t>(batch_group),
                                                         std::vector<LayerStageCycles>(layers.begin(), layers.end()));
    return schedule_training_step(all, weight_apply);
}

std::uint64_t weight_apply_cycles(const NetworkPlan& plan, const MemoryConfig& memory) {
    memory.validate();
    double weights = 0;
    for (int j = 0; j < plan.num_weight_layers(); ++j) {
        const ResolvedLayer& l = plan.weight_layer(j);
        const double fan_in = l.op.kind == WeightKind::fc ? static_cast<double>(l.in.c) * l.in.h * l.in.w
                                                          : static_cast<double>(l.op.geom.k) * l.op.geom.k * l.in.c;
        weights += fan_in * l.out.c;
    }
    return static_cast<std::uint64_t>(std::ceil(6.0 * weights / memory.bytes_per_cycle()));
}

}  // namespace h2sim
