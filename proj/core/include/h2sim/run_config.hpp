#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "h2sim/cost_report.hpp"
#include "h2sim/cycle_model.hpp"
#include "h2sim/model.hpp"

namespace h2sim {

enum class SimMode { replay, synthetic };

/// Per-layer override of the synthetic densities (fractions of zeros).
struct LayerSparsity {
    int layer = 0;
    double input_spike_sparsity = -1;
    double spike_grad_sparsity = -1;
    double potential_grad_sparsity = -1;
};

struct SyntheticConfig {
    double input_spike_sparsity = 0.8;
    double spike_grad_sparsity = 0.5;
    double potential_grad_sparsity = 0.5;
    std::vector<LayerSparsity> layers;

    /// Densities for every weight layer of a network with `layers` weight layers.
    std::vector<LayerDensity> densities(int weight_layers) const;
};

struct SweepParameter {
    std::string key;
    std::vector<nlohmann::json> values;
};

struct RunConfig {
    std::string network = "64C3-AP2-128C3-AP2-10FC";
    int in_c = 2;
    int in_h = 16;
    int in_w = 16;
    int timesteps = 4;
    int sub_batch = 4;
    int batch_group = 1;
    LifParams lif{};
    double learning_rate = 0.1;
    Precision precision = Precision::fp32;
    SimMode mode = SimMode::replay;
    std::uint64_t seed = 1;
    /// Replay mode: density of the random input spikes.
    double input_density = 0.3;
    /// Run the Backward Engine with its finders (false: dense baseline).
    bool exploit_sparsity = true;
    HardwareConfig hardware{};
    CostConstants energy = CostConstants::unit();
    SyntheticConfig synthetic{};
    std::vector<SweepParameter> sweep;
    std::string report_file = "report.json";
    std::string layers_file = "layers.csv";
    std::string sweep_file = "sweep.csv";

    NetworkSpec network_spec() const;
    /// Throws ConfigError (or ParseError for the network string).
    void validate() const;
};

/// Full JSON form with every field present; keys are sorted, so dump() is canonical.
nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& file);

/// Applies "dotted.key=value" to a config document. The value is parsed as
/// JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);
void set_json_path(nlohmann::json& doc, std::string_view dotted_key, nlohmann::json value);

/// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace h2sim
