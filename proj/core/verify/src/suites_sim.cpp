#include "h2sim/verify/suites.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "h2sim/cost_report.hpp"
#include "h2sim/cycle_model.hpp"
#include "h2sim/engine_model.hpp"
#include "h2sim/network.hpp"
#include "h2sim/pipeline.hpp"
#include "h2sim/verify/fixtures.hpp"

namespace h2sim::verify {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

CheckResult fail(CheckResult r, int cases, std::string detail) {
    r.passed = false;
    r.cases = cases;
    r.detail = std::move(detail);
    return r;
}

std::string diff(const char* field, std::uint64_t model, std::uint64_t engine) {
    return std::string(field) + " " + std::to_string(model) + " (cycle model) vs " + std::to_string(engine) +
           " (engine)";
}

/// First mismatching field, empty when equal. LUT build additions are left
/// out: the functional engine builds once per kernel, the hardware once per
/// grid iteration.
std::string compare(const OpCounts& m, const LutStats& e) {
    if (m.lut_reads != e.lut_reads) return diff("lut_reads", m.lut_reads, e.lut_reads);
    if (m.adds != e.adds) return diff("adds", m.adds, e.adds);
    if (m.macs != e.macs) return diff("macs", m.macs, e.macs);
    if (m.soma_ops != e.soma_ops) return diff("soma_ops", m.soma_ops, e.soma_ops);
    if (m.pool_ops != e.pool_ops) return diff("pool_ops", m.pool_ops, e.pool_ops);
    return {};
}

std::string compare(const OpCounts& m, const BackwardStats& e) {
    if (m.finder_scan_bits != e.finder_scan_bits) return diff("finder_scan_bits", m.finder_scan_bits, e.finder_scan_bits);
    if (m.finder_tasks != e.finder_tasks) return diff("finder_tasks", m.finder_tasks, e.finder_tasks);
    if (m.macs != e.macs) return diff("macs", m.macs, e.macs);
    if (m.grad_ops != e.grad_ops) return diff("grad_ops", m.grad_ops, e.grad_ops);
    if (m.pool_ops != e.pool_ops) return diff("pool_ops", m.pool_ops, e.pool_ops);
    return {};
}

OpCounts without_build(OpCounts o) {
    o.lut_build_adds = 0;
    return o;
}

std::uint64_t total_bound(const std::vector<LayerCycleReport>& layers, EngineKind kind) {
    std::uint64_t t = 0;
    for (const LayerCycleReport& l : layers)
        t += kind == EngineKind::forward    ? l.forward.bound
             : kind == EngineKind::backward ? l.backward.bound
                                            : l.weight_update.bound;
    return t;
}

}  // namespace

CheckResult check_replay_agreement(const SuiteOptions& opt) {
    CheckResult r{"replay-agreement", true, 0, {}};
    std::mt19937_64 rng(opt.seed + 20);
    const HardwareConfig hw;
    const int count = std::max(1, opt.fixtures / 4);
    for (int i = 0; i < count; ++i) {
        const Fixture f = random_fixture(rng, i % 2 == 0);
        const NetworkPlan plan = resolve(f.net);
        const EngineStepResult run = engine_train_step(f.net, f.weights, f.batch, 0.25);
        for (std::size_t g = 0; g < run.sub_batches.size(); ++g) {
            const EngineSubBatch& sb = run.sub_batches[g];
            const ActivityTrace trace = replay_trace(plan, sb.forward, sb.backward);
            const auto counters = replay_counters(plan, trace);
            for (int j = 0; j < plan.num_weight_layers(); ++j) {
                const auto ju = static_cast<std::size_t>(j);
                const EngineLayerStats& st = sb.stats[ju];
                const std::string at = " at layer " + std::to_string(j) + " of " + f.description();
                std::string d = compare(counters[ju].forward, st.forward);
                if (d.empty()) d = compare(counters[ju].backward, st.backward);
                if (d.empty()) d = compare(counters[ju].weight_update, st.weight_update);
                if (!d.empty()) return fail(r, i + 1, d + at);
                if (without_build(fe_cycles(plan, j, trace, hw).ops) != counters[ju].forward ||
                    without_build(be_cycles(plan, j, trace, hw).ops) != counters[ju].backward ||
                    without_build(wue_cycles(plan, j, trace, hw).ops) != counters[ju].weight_update)
                    return fail(r, i + 1, "engine cycle counters differ from the replay counters" + at);
            }
        }
        r.cases = i + 1;
    }
    r.detail = "FE, BE and WUE counters equal on " + std::to_string(r.cases) + " networks";
    return r;
}

CheckResult check_synthetic_vs_replay(const SuiteOptions& opt) {
    CheckResult r{"synthetic-vs-replay", true, 0, {}};
    NetworkSpec net;
    net.layers = parse_network("32C3-AP2-64C3-64C3-AP2-10FC");
    net.in_c = 16;
    net.in_h = 16;
    net.in_w = 16;
    net.timesteps = 4;
    net.sub_batch = 4;
    const NetworkPlan plan = resolve(net);
    const HardwareConfig hw;
    double worst = 0;
    double engine_worst = 0;
    for (int i = 0; i < 5; ++i) {
        const std::uint64_t seed = opt.seed + 30 + static_cast<std::uint64_t>(i);
        const Weights weights = init_weights(plan, seed);
        std::mt19937_64 rng(seed);
        Batch batch;
        batch.input = ActivationTensor(Shape{net.batch_size(), net.timesteps, net.in_c, net.in_h, net.in_w});
        std::bernoulli_distribution spike(0.3);
        for (std::size_t k = 0; k < batch.input.size(); ++k) batch.input[k] = spike(rng) ? 1.0f : 0.0f;
        for (int n = 0; n < net.batch_size(); ++n) batch.labels.push_back(static_cast<int>(rng() % 10));
        const StepResult step = train_step(net, weights, batch);
        const SubBatchRecord& sb = step.sub_batches.front();
        const ActivityTrace replay = replay_trace(plan, sb.forward, sb.backward);
        const auto densities = measure_densities(replay);
        const ActivityTrace synthetic = synthetic_trace(plan, net.sub_batch, net.timesteps, densities, seed);
        const auto a = simulate_layers(plan, replay, hw);
        const auto b = simulate_layers(plan, synthetic, hw);
        const std::uint64_t apply = weight_apply_cycles(plan, hw.memory);
        const double x = static_cast<double>(schedule_training_step(stage_cycles(a), 1, apply).total);
        const double y = static_cast<double>(schedule_training_step(stage_cycles(b), 1, apply).total);
        const double err = std::fabs(y - x) / x;
        worst = std::max(worst, err);
        for (EngineKind kind : {EngineKind::forward, EngineKind::backward, EngineKind::weight_update}) {
            const double e = static_cast<double>(total_bound(a, kind));
            engine_worst = std::max(engine_worst, std::fabs(static_cast<double>(total_bound(b, kind)) - e) / e);
        }
        if (err > 0.05)
            return fail(r, i + 1, "replay " + num(x) + " vs synthetic " + num(y) + " cycles per training step");
        r.cases = i + 1;
    }
    r.detail = "max step difference " + num(worst) + " (largest single engine " + num(engine_worst) + ")";
    return r;
}

CheckResult check_pipeline_property(const SuiteOptions& opt) {
    CheckResult r{"pipeline-property", true, 0, {}};
    std::mt19937_64 rng(opt.seed + 40);
    std::uniform_int_distribution<std::uint64_t> cycles(0, 1000);
    for (int i = 0; i < opt.tiles; ++i) {
        const int layers = 1 + static_cast<int>(rng() % 5);
        const int G = 1 + static_cast<int>(rng() % 8);
        std::vector<std::vector<LayerStageCycles>> groups(static_cast<std::size_t>(G));
        for (auto& g : groups)
            for (int l = 0; l < layers; ++l) g.push_back({cycles(rng), cycles(rng), cycles(rng)});
        const std::uint64_t apply = cycles(rng);
        const ScheduleReport s = schedule_training_step(groups, apply);
        r.cases = i + 1;
        if (s.total > s.sequential)
            return fail(r, i + 1, "pipelined " + std::to_string(s.total) + " > sequential " + std::to_string(s.sequential));
        if (G == 1 && s.total != s.sequential)
            return fail(r, i + 1, "G = 1 but pipelined differs from sequential");
        // One more cycle anywhere never shortens the step.
        auto bumped = groups;
        auto& stage = bumped[rng() % bumped.size()][rng() % static_cast<std::size_t>(layers)];
        switch (rng() % 3) {
        case 0: ++stage.forward; break;
        case 1: ++stage.backward; break;
        default: ++stage.weight_update; break;
        }
        if (schedule_training_step(bumped, apply).total < s.total)
            return fail(r, i + 1, "adding a cycle to one stage shortened the step");
    }
    r.detail = "pipelined <= sequential, equal at G = 1, monotone in every stage";
    return r;
}

CheckResult check_lut_storage(const SuiteOptions&) {
    CheckResult r{"lut-storage", true, 0, {}};
    r.cases = 2;
    const HardwareConfig hw;
    const LutStorage s = lut_storage_report(hw);
    if (s.forward_bytes != 49152 || s.weight_update_bytes != 81920)
        return fail(r, 1, "forward " + std::to_string(s.forward_bytes) + " B, weight update " +
                              std::to_string(s.weight_update_bytes) + " B");
    HardwareConfig half = hw;
    --half.fe.lut.sublut_bits;
    --half.wue.lut.sublut_bits;
    const LutStorage h = lut_storage_report(half);
    if (2 * h.forward_bytes != s.forward_bytes || 2 * h.weight_update_bytes != s.weight_update_bytes)
        return fail(r, 2, "halving the sub-LUT entries did not halve the bytes");
    r.detail = "49152 B forward, 81920 B weight update";
    return r;
}

std::vector<Suite> all_suites() {
    return {
        {"oracle-equivalence", check_oracle_equivalence},
        {"engine-equivalence", check_engine_equivalence},
        {"mask-consistency", check_mask_consistency},
        {"reset-correctness", check_reset_correctness},
        {"determinism", check_determinism},
        {"lut-equivalence", check_lut_equivalence},
        {"compression-roundtrip", check_compression_roundtrip},
        {"sparse-work-accounting", check_sparse_work_accounting},
        {"buffer-balance", check_buffer_balance},
        {"task-monotonicity", check_task_monotonicity},
        {"replay-agreement", check_replay_agreement},
        {"synthetic-vs-replay", check_synthetic_vs_replay},
        {"pipeline-property", check_pipeline_property},
        {"lut-storage", check_lut_storage},
    };
}

}  // namespace h2sim::verify
