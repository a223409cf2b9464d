#include "h2sim/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace h2sim {

using nlohmann::json;

namespace {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError("config: '" + where() + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& target) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            target = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config: '" + child(key) + "' has the wrong type");
        }
    }

    void get(const char* key, std::optional<double>& target) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        if (it->is_null()) {
            target.reset();
            return;
        }
        if (!it->is_number()) throw ConfigError("config: '" + child(key) + "' must be a number or null");
        target = it->get<double>();
    }

    /// Calls `f(Reader&)` when the sub-object is present.
    template <typename F>
    void object(const char* key, F&& f) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        Reader sub(*it, child(key));
        f(sub);
        sub.finish();
    }

    const json* raw(const char* key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& item : obj_.items())
            if (!seen_.count(item.key())) throw ConfigError("config: unknown key '" + child(item.key()) + "'");
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

json lut_json(const LutPeConfig& l) {
    return {{"subluts_per_pe", l.subluts_per_pe},
            {"sublut_bits", l.sublut_bits},
            {"bytes_per_entry", l.bytes_per_entry},
            {"window_h", l.window_h},
            {"window_w", l.window_w}};
}

void read_lut(Reader& r, LutPeConfig& l) {
    r.get("subluts_per_pe", l.subluts_per_pe);
    r.get("sublut_bits", l.sublut_bits);
    r.get("bytes_per_entry", l.bytes_per_entry);
    r.get("window_h", l.window_h);
    r.get("window_w", l.window_w);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void check_fraction(double v, const std::string& what) {
    if (!(v >= 0 && v <= 1)) throw ConfigError("config: " + what + " must lie in [0, 1]");
}

}  // namespace

std::vector<LayerDensity> SyntheticConfig::densities(int weight_layers) const {
    std::vector<LayerDensity> out(static_cast<std::size_t>(weight_layers),
                                  LayerDensity{1 - input_spike_sparsity, 1 - spike_grad_sparsity,
                                               1 - potential_grad_sparsity});
    for (const LayerSparsity& l : layers) {
        if (l.layer < 0 || l.layer >= weight_layers)
            throw ConfigError("config: synthetic layer " + std::to_string(l.layer) + " does not exist");
        LayerDensity& d = out[static_cast<std::size_t>(l.layer)];
        if (l.input_spike_sparsity >= 0) d.input_spikes = 1 - l.input_spike_sparsity;
        if (l.spike_grad_sparsity >= 0) d.spike_grad = 1 - l.spike_grad_sparsity;
        if (l.potential_grad_sparsity >= 0) d.potential_grad = 1 - l.potential_grad_sparsity;
    }
    return out;
}

NetworkSpec RunConfig::network_spec() const {
    NetworkSpec net;
    net.in_c = in_c;
    net.in_h = in_h;
    net.in_w = in_w;
    net.timesteps = timesteps;
    net.layers = parse_network(network);
    net.lif = lif;
    net.sub_batch = sub_batch;
    net.batch_group = batch_group;
    return net;
}

void RunConfig::validate() const {
    const NetworkPlan plan = resolve(network_spec());
    lif.validate();
    hardware.validate();
    energy.validate();
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("config: learning_rate must be positive");
    check_fraction(input_density, "input_density");
    check_fraction(synthetic.input_spike_sparsity, "synthetic.input_spike_sparsity");
    check_fraction(synthetic.spike_grad_sparsity, "synthetic.spike_grad_sparsity");
    check_fraction(synthetic.potential_grad_sparsity, "synthetic.potential_grad_sparsity");
    for (const LayerSparsity& l : synthetic.layers)
        for (double v : {l.input_spike_sparsity, l.spike_grad_sparsity, l.potential_grad_sparsity})
            if (v >= 0) check_fraction(v, "synthetic layer sparsity");
    (void)synthetic.densities(plan.num_weight_layers());
    for (const SweepParameter& p : sweep)
        if (p.key.empty() || p.values.empty()) throw ConfigError("config: sweep entries need a key and values");
    for (const std::string& f : {report_file, layers_file, sweep_file})
        if (f.empty() || std::filesystem::path(f).has_parent_path())
            throw ConfigError("config: output file names must be plain names inside the output directory");
}

json to_json(const RunConfig& c) {
    const HardwareConfig& hw = c.hardware;
    json synthetic_layers = json::array();
    for (const LayerSparsity& l : c.synthetic.layers) {
        json e = {{"layer", l.layer}};
        if (l.input_spike_sparsity >= 0) e["input_spike_sparsity"] = l.input_spike_sparsity;
        if (l.spike_grad_sparsity >= 0) e["spike_grad_sparsity"] = l.spike_grad_sparsity;
        if (l.potential_grad_sparsity >= 0) e["potential_grad_sparsity"] = l.potential_grad_sparsity;
        synthetic_layers.push_back(e);
    }
    json sweep = json::array();
    for (const SweepParameter& p : c.sweep) sweep.push_back({{"key", p.key}, {"values", p.values}});
    return {
        {"network", c.network},
        {"input", {{"channels", c.in_c}, {"height", c.in_h}, {"width", c.in_w}}},
        {"timesteps", c.timesteps},
        {"sub_batch", c.sub_batch},
        {"batch_group", c.batch_group},
        {"lif", {{"alpha", c.lif.alpha}, {"th_f", c.lif.th_f}, {"th_l", c.lif.th_l}, {"th_r", c.lif.th_r}, {"beta", c.lif.beta}}},
        {"learning_rate", c.learning_rate},
        {"precision", std::string(to_string(c.precision))},
        {"mode", c.mode == SimMode::replay ? "replay" : "synthetic"},
        {"seed", c.seed},
        {"input_density", c.input_density},
        {"hardware",
         {{"forward",
           {{"rows", hw.fe.pe_rows},
            {"cols", hw.fe.pe_cols},
            {"parallelism", hw.fe.parallelism},
            {"t_max", hw.fe.t_max},
            {"glb_kb", hw.fe.glb_bytes / 1024},
            {"soma_units", hw.fe.element_units},
            {"lut", lut_json(hw.fe.lut)}}},
          {"weight_update",
           {{"rows", hw.wue.pe_rows},
            {"cols", hw.wue.pe_cols},
            {"parallelism", hw.wue.parallelism},
            {"glb_kb", hw.wue.glb_bytes / 1024},
            {"lut", lut_json(hw.wue.lut)}}},
          {"backward",
           {{"rows", hw.be.pe_rows},
            {"cols", hw.be.pe_cols},
            {"group", hw.be.parallelism},
            {"t_max", hw.be.t_max},
            {"glb_kb", hw.be.glb_bytes / 1024},
            {"grad_units", hw.be.element_units},
            {"finders", hw.be.finders},
            {"scan_width", hw.be.scan_width},
            {"sync_cycles", hw.be.sync_cycles},
            {"exploit_sparsity", c.exploit_sparsity}}},
          {"memory",
           {{"bandwidth_gb_s", hw.memory.bytes_per_second / 1e9},
            {"clock_mhz", hw.memory.clock_hz / 1e6},
            {"spaces", hw.memory.spaces}}},
          {"tile", {{"height", hw.tile.h}, {"width", hw.tile.w}}}}},
        {"energy",
         {{"lut_read", optional_json(c.energy.lut_read)},
          {"add", optional_json(c.energy.add)},
          {"mac", optional_json(c.energy.mac)},
          {"glb_byte", optional_json(c.energy.glb_byte)},
          {"dram_byte", optional_json(c.energy.dram_byte)},
          {"element_op", optional_json(c.energy.element_op)},
          {"finder_op", optional_json(c.energy.finder_op)},
          {"fe_leakage", optional_json(c.energy.fe_leakage)},
          {"be_leakage", optional_json(c.energy.be_leakage)},
          {"wue_leakage", optional_json(c.energy.wue_leakage)}}},
        {"synthetic",
         {{"input_spike_sparsity", c.synthetic.input_spike_sparsity},
          {"spike_grad_sparsity", c.synthetic.spike_grad_sparsity},
          {"potential_grad_sparsity", c.synthetic.potential_grad_sparsity},
          {"layers", synthetic_layers}}},
        {"sweep", sweep},
        {"output", {{"report", c.report_file}, {"layers", c.layers_file}, {"sweep", c.sweep_file}}},
    };
}

RunConfig run_config_from_json(const json& doc) {
    RunConfig c;
    HardwareConfig& hw = c.hardware;
    Reader root(doc, "");
    root.get("network", c.network);
    root.object("input", [&](Reader& r) {
        r.get("channels", c.in_c);
        r.get("height", c.in_h);
        r.get("width", c.in_w);
    });
    root.get("timesteps", c.timesteps);
    root.get("sub_batch", c.sub_batch);
    root.get("batch_group", c.batch_group);
    root.object("lif", [&](Reader& r) {
        r.get("alpha", c.lif.alpha);
        r.get("th_f", c.lif.th_f);
        r.get("th_l", c.lif.th_l);
        r.get("th_r", c.lif.th_r);
        r.get("beta", c.lif.beta);
    });
    root.get("learning_rate", c.learning_rate);
    std::string precision(to_string(c.precision));
    root.get("precision", precision);
    try {
        c.precision = parse_precision(precision);
    } catch (const Error&) {
        throw ConfigError("config: precision must be fp32 or fp16");
    }
    std::string mode = c.mode == SimMode::replay ? "replay" : "synthetic";
    root.get("mode", mode);
    if (mode == "replay")
        c.mode = SimMode::replay;
    else if (mode == "synthetic")
        c.mode = SimMode::synthetic;
    else
        throw ConfigError("config: mode must be replay or synthetic");
    root.get("seed", c.seed);
    root.get("input_density", c.input_density);
    root.object("hardware", [&](Reader& h) {
        h.object("forward", [&](Reader& r) {
            r.get("rows", hw.fe.pe_rows);
            r.get("cols", hw.fe.pe_cols);
            r.get("parallelism", hw.fe.parallelism);
            r.get("t_max", hw.fe.t_max);
            double kb = hw.fe.glb_bytes / 1024;
            r.get("glb_kb", kb);
            hw.fe.glb_bytes = kb * 1024;
            r.get("soma_units", hw.fe.element_units);
            r.object("lut", [&](Reader& l) { read_lut(l, hw.fe.lut); });
        });
        h.object("weight_update", [&](Reader& r) {
            r.get("rows", hw.wue.pe_rows);
            r.get("cols", hw.wue.pe_cols);
            r.get("parallelism", hw.wue.parallelism);
            double kb = hw.wue.glb_bytes / 1024;
            r.get("glb_kb", kb);
            hw.wue.glb_bytes = kb * 1024;
            r.object("lut", [&](Reader& l) { read_lut(l, hw.wue.lut); });
        });
        h.object("backward", [&](Reader& r) {
            r.get("rows", hw.be.pe_rows);
            r.get("cols", hw.be.pe_cols);
            r.get("group", hw.be.parallelism);
            r.get("t_max", hw.be.t_max);
            double kb = hw.be.glb_bytes / 1024;
            r.get("glb_kb", kb);
            hw.be.glb_bytes = kb * 1024;
            r.get("grad_units", hw.be.element_units);
            r.get("finders", hw.be.finders);
            r.get("scan_width", hw.be.scan_width);
            r.get("sync_cycles", hw.be.sync_cycles);
            r.get("exploit_sparsity", c.exploit_sparsity);
        });
        h.object("memory", [&](Reader& r) {
            double gbs = hw.memory.bytes_per_second / 1e9;
            double mhz = hw.memory.clock_hz / 1e6;
            r.get("bandwidth_gb_s", gbs);
            r.get("clock_mhz", mhz);
            r.get("spaces", hw.memory.spaces);
            hw.memory.bytes_per_second = gbs * 1e9;
            hw.memory.clock_hz = mhz * 1e6;
        });
        h.object("tile", [&](Reader& r) {
            r.get("height", hw.tile.h);
            r.get("width", hw.tile.w);
        });
    });
    root.object("energy", [&](Reader& r) {
        r.get("lut_read", c.energy.lut_read);
        r.get("add", c.energy.add);
        r.get("mac", c.energy.mac);
        r.get("glb_byte", c.energy.glb_byte);
        r.get("dram_byte", c.energy.dram_byte);
        r.get("element_op", c.energy.element_op);
        r.get("finder_op", c.energy.finder_op);
        r.get("fe_leakage", c.energy.fe_leakage);
        r.get("be_leakage", c.energy.be_leakage);
        r.get("wue_leakage", c.energy.wue_leakage);
    });
    root.object("synthetic", [&](Reader& r) {
        r.get("input_spike_sparsity", c.synthetic.input_spike_sparsity);
        r.get("spike_grad_sparsity", c.synthetic.spike_grad_sparsity);
        r.get("potential_grad_sparsity", c.synthetic.potential_grad_sparsity);
        if (const json* layers = r.raw("layers")) {
            if (!layers->is_array()) throw ConfigError("config: 'synthetic.layers' must be an array");
            c.synthetic.layers.clear();
            for (std::size_t i = 0; i < layers->size(); ++i) {
                Reader e((*layers)[i], "synthetic.layers[" + std::to_string(i) + "]");
                LayerSparsity l;
                e.get("layer", l.layer);
                e.get("input_spike_sparsity", l.input_spike_sparsity);
                e.get("spike_grad_sparsity", l.spike_grad_sparsity);
                e.get("potential_grad_sparsity", l.potential_grad_sparsity);
                e.finish();
                c.synthetic.layers.push_back(l);
            }
        }
    });
    if (const json* sweep = root.raw("sweep")) {
        if (!sweep->is_array()) throw ConfigError("config: 'sweep' must be an array");
        for (std::size_t i = 0; i < sweep->size(); ++i) {
            Reader e((*sweep)[i], "sweep[" + std::to_string(i) + "]");
            SweepParameter p;
            e.get("key", p.key);
            if (const json* values = e.raw("values")) {
                if (!values->is_array()) throw ConfigError("config: sweep values must be an array");
                p.values.assign(values->begin(), values->end());
            }
            e.finish();
            c.sweep.push_back(std::move(p));
        }
    }
    root.object("output", [&](Reader& r) {
        r.get("report", c.report_file);
        r.get("layers", c.layers_file);
        r.get("sweep", c.sweep_file);
    });
    root.finish();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config: cannot open " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + file.string() + ": " + e.what());
    }
    return run_config_from_json(doc);
}

void set_json_path(json& doc, std::string_view dotted_key, json value) {
    if (dotted_key.empty()) throw ConfigError("override: empty key");
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted_key.find('.', start);
        const std::string part(dotted_key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (part.empty()) throw ConfigError("override: malformed key '" + std::string(dotted_key) + "'");
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError("override: '" + std::string(dotted_key) + "' crosses a non-object");
            *node = json::object();
        }
        if (dot == std::string_view::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void apply_override(json& doc, std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ConfigError("override: expected key=value, got '" + std::string(assignment) + "'");
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set_json_path(doc, assignment.substr(0, eq), std::move(value));
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
    return buf;
}

}  // namespace h2sim
