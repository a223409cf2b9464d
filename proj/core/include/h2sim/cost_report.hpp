#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "h2sim/cycle_model.hpp"

namespace h2sim {

/// Per-event energy constants in arbitrary units. A constant left unset is an
/// error only when its event actually occurs.
struct CostConstants {
    std::optional<double> lut_read;
    /// FP16 add (accumulation and sub-LUT construction).
    std::optional<double> add;
    std::optional<double> mac;
    std::optional<double> glb_byte;
    std::optional<double> dram_byte;
    /// Soma, Grad and pooling element operations.
    std::optional<double> element_op;
    /// Finder scan bit or issued task.
    std::optional<double> finder_op;
    /// Leakage per busy cycle of each engine.
    std::optional<double> fe_leakage;
    std::optional<double> be_leakage;
    std::optional<double> wue_leakage;

    /// Every constant set to 1.0.
    static CostConstants unit();
    /// Throws ConfigError on a negative or non-finite constant.
    void validate() const;
};

/// Everything that is charged energy.
struct CostCounts {
    OpCounts ops;
    double glb_bytes = 0;
    double dram_bytes = 0;
    /// Busy cycles of FE, BE and WUE.
    std::array<std::uint64_t, 3> engine_cycles{};

    CostCounts& operator+=(const CostCounts& o) noexcept;
    /// Sum of all event counts (ops and bytes), cycles excluded.
    double events() const noexcept;
    std::uint64_t cycles() const noexcept { return engine_cycles[0] + engine_cycles[1] + engine_cycles[2]; }
};

CostCounts engine_counts(const EngineCycles& e, EngineKind kind);

struct EnergyReport {
    double pe_array = 0;
    double acc = 0;
    double glb = 0;
    double dram = 0;
    double finders = 0;
    double elementwise = 0;
    double leakage = 0;

    double dynamic() const noexcept { return pe_array + acc + glb + dram + finders + elementwise; }
    double total() const noexcept { return dynamic() + leakage; }
    EnergyReport& operator+=(const EnergyReport& o) noexcept;
};

/// PE array: LUT reads and MACs. Acc: adds and LUT builds. GLB/DRAM: bytes.
/// Finders: scan bits and tasks. Element-wise: Soma, Grad and pooling.
/// Leakage: engine busy cycles.
EnergyReport tally_energy(const CostCounts& counts, const CostConstants& k);

struct LutStorage {
    std::uint64_t forward_bytes = 0;
    std::uint64_t weight_update_bytes = 0;
};

/// PEs x sub-LUTs per PE x entries x bytes per entry, per LUT engine.
LutStorage lut_storage_report(const HardwareConfig& hw);

}  // namespace h2sim
