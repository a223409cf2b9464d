#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "h2sim/cost_report.hpp"
#include "h2sim/cycle_model.hpp"
#include "h2sim/pipeline.hpp"
#include "h2sim/run_config.hpp"

namespace h2sim {

inline constexpr const char* kReportSchema = "h2sim.report/1";
inline constexpr const char* kSweepSchema = "h2sim.sweep/1";

/// Per-layer cycles and energy of one training iteration, layers summed over
/// the sub-batches of the batch group.
struct SimulationReport {
    RunConfig config;
    std::string config_hash;
    std::vector<LayerCycleReport> layers;
    /// Mask densities of the first sub-batch.
    std::vector<LayerDensity> densities;
    ScheduleReport schedule;
    CostCounts counts;
    EnergyReport energy;
    /// FE, BE, WUE.
    std::array<EnergyReport, 3> engine_energy{};
    LutStorage lut_storage;
    /// Replay mode only: loss of the functional training step.
    std::optional<double> loss;
};

/// Replay: seeded weights and input through the golden training step, then
/// the recorded masks through the cycle model. Synthetic: seeded Bernoulli
/// masks with the configured sparsities.
SimulationReport simulate(const RunConfig& cfg);

nlohmann::json report_json(const SimulationReport& report);
/// One row per (layer, engine).
std::string layers_csv(const SimulationReport& report);

struct SweepRow {
    int point = 0;
    std::vector<nlohmann::json> values;
    std::uint64_t fe_cycles = 0;
    std::uint64_t be_cycles = 0;
    std::uint64_t wue_cycles = 0;
    std::uint64_t total_cycles = 0;
    EnergyReport energy;
    std::string config_hash;
};

struct SweepResult {
    std::vector<std::string> keys;
    std::vector<SweepRow> rows;
};

/// Cartesian product of the sweep values (last key varies fastest), each
/// point a full simulation of `base` with those keys overridden.
SweepResult run_sweep(const RunConfig& base, const std::vector<SweepParameter>& parameters);
std::string sweep_csv(const SweepResult& result);

/// Writes `text` to `path` with "\n" line endings, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace h2sim
