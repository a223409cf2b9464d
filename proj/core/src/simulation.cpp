#include "h2sim/simulation.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace h2sim {

using nlohmann::json;

namespace {

Batch random_batch(const NetworkSpec& net, const NetworkPlan& plan, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const bool real = net.layers.front().is_encoding;
    const int B = net.batch_size();
    Batch b;
    b.input = ActivationTensor(Shape{B, real ? 1 : net.timesteps, net.in_c, net.in_h, net.in_w});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < b.input.size(); ++i)
        b.input[i] = real ? static_cast<Real>(unit(rng)) : (unit(rng) < density ? 1.0f : 0.0f);
    std::uniform_int_distribution<int> label(0, plan.num_classes - 1);
    for (int n = 0; n < B; ++n) b.labels.push_back(label(rng));
    return b;
}

/// Independent stream per sub-batch.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

json ops_json(const OpCounts& o) {
    return {{"lut_reads", o.lut_reads},       {"adds", o.adds},         {"macs", o.macs},
            {"lut_build_adds", o.lut_build_adds}, {"soma_ops", o.soma_ops}, {"grad_ops", o.grad_ops},
            {"pool_ops", o.pool_ops},         {"finder_scan_bits", o.finder_scan_bits},
            {"finder_tasks", o.finder_tasks}};
}

json engine_json(const EngineCycles& e) {
    return {{"cycles",
             {{"compute", e.compute},
              {"array", e.array},
              {"elementwise", e.elementwise},
              {"memory", e.memory},
              {"bound", e.bound}}},
            {"grid_iterations", e.grid_iterations},
            {"tiles", e.tiles},
            {"ops", ops_json(e.ops)},
            {"traffic_bytes", {{"mem0", e.traffic[0]}, {"mem1", e.traffic[1]}, {"mem2", e.traffic[2]}}},
            {"peak_working_set_bytes", e.peak_working_set},
            {"dense_input", e.dense_input}};
}

json energy_json(const EnergyReport& e) {
    return {{"pe_array", e.pe_array}, {"acc", e.acc},         {"glb", e.glb},
            {"dram", e.dram},         {"finders", e.finders}, {"elementwise", e.elementwise},
            {"leakage", e.leakage},   {"dynamic", e.dynamic()}, {"total", e.total()}};
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string csv_value(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

SimulationReport simulate(const RunConfig& cfg) {
    cfg.validate();
    SimulationReport rep;
    rep.config = cfg;
    rep.config_hash = config_hash(cfg);
    const NetworkSpec net = cfg.network_spec();
    const NetworkPlan plan = resolve(net);
    const HardwareConfig& hw = cfg.hardware;

    std::vector<ActivityTrace> traces;
    if (cfg.mode == SimMode::replay) {
        const Weights weights = init_weights(plan, cfg.seed);
        const Batch batch = random_batch(net, plan, cfg.input_density, derive_seed(cfg.seed, 1));
        const StepResult step = train_step(net, weights, batch, TrainOptions{cfg.learning_rate, cfg.precision});
        rep.loss = step.loss;
        for (const SubBatchRecord& sb : step.sub_batches) traces.push_back(replay_trace(plan, sb.forward, sb.backward));
    } else {
        const auto densities = cfg.synthetic.densities(plan.num_weight_layers());
        for (int g = 0; g < cfg.batch_group; ++g)
            traces.push_back(synthetic_trace(plan, cfg.sub_batch, cfg.timesteps, densities,
                                             derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(g))));
    }
    rep.densities = measure_densities(traces.front());

    std::vector<std::vector<LayerStageCycles>> stages;
    for (const ActivityTrace& trace : traces) {
        const auto layers = simulate_layers(plan, trace, hw, cfg.exploit_sparsity);
        stages.push_back(stage_cycles(layers));
        if (rep.layers.empty()) {
            rep.layers = layers;
        } else {
            for (std::size_t j = 0; j < layers.size(); ++j) {
                rep.layers[j].forward += layers[j].forward;
                rep.layers[j].backward += layers[j].backward;
                rep.layers[j].weight_update += layers[j].weight_update;
            }
        }
    }
    const std::uint64_t apply = weight_apply_cycles(plan, hw.memory);
    rep.schedule = schedule_training_step(stages, apply);

    std::array<CostCounts, 3> per_engine{};
    for (const LayerCycleReport& l : rep.layers) {
        per_engine[0] += engine_counts(l.forward, EngineKind::forward);
        per_engine[1] += engine_counts(l.backward, EngineKind::backward);
        per_engine[2] += engine_counts(l.weight_update, EngineKind::weight_update);
    }
    // Weight apply: read w and grad w, write w.
    const double apply_bytes = static_cast<double>(apply) * hw.memory.bytes_per_cycle();
    per_engine[2].dram_bytes += apply_bytes;
    per_engine[2].glb_bytes += apply_bytes;
    for (std::size_t e = 0; e < 3; ++e) {
        rep.counts += per_engine[e];
        rep.engine_energy[e] = tally_energy(per_engine[e], cfg.energy);
        rep.energy += rep.engine_energy[e];
    }
    rep.lut_storage = lut_storage_report(hw);
    return rep;
}

json report_json(const SimulationReport& r) {
    json layers = json::array();
    for (std::size_t j = 0; j < r.layers.size(); ++j) {
        const LayerCycleReport& l = r.layers[j];
        const LayerDensity& d = r.densities[j];
        layers.push_back({{"index", l.layer},
                          {"name", l.name},
                          {"densities",
                           {{"input_spikes", d.input_spikes},
                            {"spike_grad", d.spike_grad},
                            {"potential_grad", d.potential_grad}}},
                          {"forward", engine_json(l.forward)},
                          {"backward", engine_json(l.backward)},
                          {"weight_update", engine_json(l.weight_update)}});
    }
    const ScheduleReport& s = r.schedule;
    json stages = json::array();
    for (const ScheduleStage& st : s.stages)
        stages.push_back({{"index", st.index}, {"cycles", st.cycles}, {"bound_by", st.bound_by}});
    json out = {
        {"schema", kReportSchema},
        {"config_hash", r.config_hash},
        {"config", to_json(r.config)},
        {"layers", layers},
        {"schedule",
         {{"batch_group", s.batch_group},
          {"forward_cycles", s.forward},
          {"backward_cycles", s.backward},
          {"weight_apply_cycles", s.weight_apply},
          {"total_cycles", s.total},
          {"sequential_cycles", s.sequential},
          {"busy_cycles", {{"forward", s.fe_busy}, {"backward", s.be_busy}, {"weight_update", s.wue_busy}}},
          {"utilization",
           {{"forward", s.fe_utilization}, {"backward", s.be_utilization}, {"weight_update", s.wue_utilization}}},
          {"stages", stages}}},
        {"energy",
         {{"total", energy_json(r.energy)},
          {"forward", energy_json(r.engine_energy[0])},
          {"backward", energy_json(r.engine_energy[1])},
          {"weight_update", energy_json(r.engine_energy[2])},
          {"counts",
           {{"ops", ops_json(r.counts.ops)},
            {"glb_bytes", r.counts.glb_bytes},
            {"dram_bytes", r.counts.dram_bytes},
            {"engine_cycles", r.counts.engine_cycles}}}}},
        {"lut_storage_bytes",
         {{"forward", r.lut_storage.forward_bytes}, {"weight_update", r.lut_storage.weight_update_bytes}}},
    };
    out["functional"] = r.loss ? json{{"loss", *r.loss}} : json{{"loss", nullptr}};
    return out;
}

std::string layers_csv(const SimulationReport& r) {
    std::ostringstream os;
    os << "layer,name,engine,compute,array,elementwise,memory,bound,grid_iterations,tiles,lut_reads,adds,macs,"
          "lut_build_adds,soma_ops,grad_ops,pool_ops,finder_scan_bits,finder_tasks,mem0_bytes,mem1_bytes,mem2_bytes\n";
    for (const LayerCycleReport& l : r.layers) {
        const std::pair<const char*, const EngineCycles*> engines[] = {
            {"forward", &l.forward}, {"backward", &l.backward}, {"weight_update", &l.weight_update}};
        for (const auto& [name, e] : engines) {
            const OpCounts& o = e->ops;
            os << l.layer << ',' << l.name << ',' << name << ',' << e->compute << ',' << e->array << ','
               << e->elementwise << ',' << e->memory << ',' << e->bound << ',' << e->grid_iterations << ','
               << e->tiles << ',' << o.lut_reads << ',' << o.adds << ',' << o.macs << ',' << o.lut_build_adds << ','
               << o.soma_ops << ',' << o.grad_ops << ',' << o.pool_ops << ',' << o.finder_scan_bits << ','
               << o.finder_tasks << ',' << num(e->traffic[0]) << ',' << num(e->traffic[1]) << ','
               << num(e->traffic[2]) << '\n';
        }
    }
    return os.str();
}

SweepResult run_sweep(const RunConfig& base, const std::vector<SweepParameter>& parameters) {
    SweepResult result;
    std::size_t points = 1;
    for (const SweepParameter& p : parameters) {
        if (p.values.empty()) throw ConfigError("sweep: parameter '" + p.key + "' has no values");
        result.keys.push_back(p.key);
        points *= p.values.size();
    }
    json doc = to_json(base);
    doc["sweep"] = json::array();
    for (std::size_t point = 0; point < points; ++point) {
        json d = doc;
        SweepRow row;
        row.point = static_cast<int>(point);
        std::size_t rest = point;
        std::vector<nlohmann::json> values(parameters.size());
        for (std::size_t i = parameters.size(); i-- > 0;) {
            const auto& vals = parameters[i].values;
            values[i] = vals[rest % vals.size()];
            rest /= vals.size();
        }
        for (std::size_t i = 0; i < parameters.size(); ++i) set_json_path(d, parameters[i].key, values[i]);
        RunConfig cfg;
        try {
            cfg = run_config_from_json(d);
        } catch (const ConfigError& e) {
            throw ConfigError("sweep point " + std::to_string(point) + ": " + e.what());
        }
        const SimulationReport rep = simulate(cfg);
        row.values = std::move(values);
        for (const LayerCycleReport& l : rep.layers) {
            row.fe_cycles += l.forward.bound;
            row.be_cycles += l.backward.bound;
            row.wue_cycles += l.weight_update.bound;
        }
        row.total_cycles = rep.schedule.total;
        row.energy = rep.energy;
        row.config_hash = rep.config_hash;
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string sweep_csv(const SweepResult& r) {
    std::ostringstream os;
    os << "point";
    for (const std::string& k : r.keys) os << ',' << k;
    os << ",fe_cycles,be_cycles,wue_cycles,total_cycles,energy_pe_array,energy_acc,energy_glb,energy_dram,"
          "energy_finders,energy_elementwise,energy_leakage,energy_total,config_hash\n";
    for (const SweepRow& row : r.rows) {
        os << row.point;
        for (const json& v : row.values) os << ',' << csv_value(v);
        const EnergyReport& e = row.energy;
        os << ',' << row.fe_cycles << ',' << row.be_cycles << ',' << row.wue_cycles << ',' << row.total_cycles << ','
           << num(e.pe_array) << ',' << num(e.acc) << ',' << num(e.glb) << ',' << num(e.dram) << ','
           << num(e.finders) << ',' << num(e.elementwise) << ',' << num(e.leakage) << ',' << num(e.total()) << ','
           << row.config_hash << '\n';
    }
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

}  // namespace h2sim
