#include "h2sim/cost_report.hpp"

#include <cmath>
#include <string>

namespace h2sim {

namespace {

double charge(const std::optional<double>& constant, double count, const char* name) {
    if (count == 0) return 0;
    if (!constant) throw ConfigError(std::string("cost: missing constant '") + name + "'");
    return count * *constant;
}

double as_double(std::uint64_t v) { return static_cast<double>(v); }

}  // namespace

CostConstants CostConstants::unit() { return {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}; }

void CostConstants::validate() const {
    const std::pair<const char*, const std::optional<double>*> all[] = {
        {"lut_read", &lut_read},     {"add", &add},
        {"mac", &mac},               {"glb_byte", &glb_byte},
        {"dram_byte", &dram_byte},   {"element_op", &element_op},
        {"finder_op", &finder_op},   {"fe_leakage", &fe_leakage},
        {"be_leakage", &be_leakage}, {"wue_leakage", &wue_leakage}};
    for (const auto& [name, value] : all)
        if (*value && (!(**value >= 0) || !std::isfinite(**value)))
            throw ConfigError(std::string("cost: constant '") + name + "' must be finite and non-negative");
}

CostCounts& CostCounts::operator+=(const CostCounts& o) noexcept {
    ops += o.ops;
    glb_bytes += o.glb_bytes;
    dram_bytes += o.dram_bytes;
    for (std::size_t i = 0; i < engine_cycles.size(); ++i) engine_cycles[i] += o.engine_cycles[i];
    return *this;
}

double CostCounts::events() const noexcept { return as_double(ops.total()) + glb_bytes + dram_bytes; }

CostCounts engine_counts(const EngineCycles& e, EngineKind kind) {
    CostCounts c;
    c.ops = e.ops;
    c.dram_bytes = e.traffic_total();
    c.glb_bytes = e.traffic_total();
    c.engine_cycles[static_cast<std::size_t>(kind)] = e.bound;
    return c;
}

EnergyReport& EnergyReport::operator+=(const EnergyReport& o) noexcept {
    pe_array += o.pe_array;
    acc += o.acc;
    glb += o.glb;
    dram += o.dram;
    finders += o.finders;
    elementwise += o.elementwise;
    leakage += o.leakage;
    return *this;
}

EnergyReport tally_energy(const CostCounts& counts, const CostConstants& k) {
    k.validate();
    const OpCounts& o = counts.ops;
    EnergyReport r;
    r.pe_array = charge(k.lut_read, as_double(o.lut_reads), "lut_read") + charge(k.mac, as_double(o.macs), "mac");
    r.acc = charge(k.add, as_double(o.adds) + as_double(o.lut_build_adds), "add");
    r.glb = charge(k.glb_byte, counts.glb_bytes, "glb_byte");
    r.dram = charge(k.dram_byte, counts.dram_bytes, "dram_byte");
    r.finders = charge(k.finder_op, as_double(o.finder_scan_bits) + as_double(o.finder_tasks), "finder_op");
    r.elementwise =
        charge(k.element_op, as_double(o.soma_ops) + as_double(o.grad_ops) + as_double(o.pool_ops), "element_op");
    r.leakage = charge(k.fe_leakage, as_double(counts.engine_cycles[0]), "fe_leakage") +
                charge(k.be_leakage, as_double(counts.engine_cycles[1]), "be_leakage") +
                charge(k.wue_leakage, as_double(counts.engine_cycles[2]), "wue_leakage");
    return r;
}

LutStorage lut_storage_report(const HardwareConfig& hw) {
    const auto bytes = [](const EngineConfig& e) {
        return static_cast<std::uint64_t>(e.pe_rows) * static_cast<std::uint64_t>(e.pe_cols) *
               static_cast<std::uint64_t>(e.lut.bytes_per_pe());
    };
    return {bytes(hw.fe), bytes(hw.wue)};
}

}  // namespace h2sim
