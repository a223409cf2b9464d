#include <catch_amalgamated.hpp>

#include <vector>

#include "h2sim/cost_report.hpp"
#include "h2sim/verify/suites.hpp"

using namespace h2sim;
using Catch::Approx;

namespace {

CostCounts sample_counts() {
    CostCounts c;
    c.ops.lut_reads = 1200;
    c.ops.adds = 1300;
    c.ops.macs = 400;
    c.ops.lut_build_adds = 44;
    c.ops.soma_ops = 90;
    c.ops.grad_ops = 70;
    c.ops.pool_ops = 30;
    c.ops.finder_scan_bits = 512;
    c.ops.finder_tasks = 380;
    c.glb_bytes = 4096;
    c.dram_bytes = 4096;
    c.engine_cycles = {700, 500, 300};
    return c;
}

using Field = std::optional<double> CostConstants::*;
const std::vector<Field> kFields{&CostConstants::lut_read,   &CostConstants::add,        &CostConstants::mac,
                                 &CostConstants::glb_byte,   &CostConstants::dram_byte,  &CostConstants::element_op,
                                 &CostConstants::finder_op,  &CostConstants::fe_leakage, &CostConstants::be_leakage,
                                 &CostConstants::wue_leakage};

}  // namespace

TEST_CASE("Unit constants count events plus cycles", "[energy]") {
    const CostCounts c = sample_counts();
    const EnergyReport e = tally_energy(c, CostConstants::unit());
    CHECK(e.total() == Approx(c.events() + static_cast<double>(c.cycles())));
    CHECK(e.leakage == 1500.0);
}

TEST_CASE("Zero leakage makes energy independent of cycles", "[energy]") {
    CostConstants k = CostConstants::unit();
    k.fe_leakage = k.be_leakage = k.wue_leakage = 0.0;
    CostCounts a = sample_counts();
    CostCounts b = a;
    b.engine_cycles = {1, 99999, 12345};
    CHECK(tally_energy(a, k).total() == tally_energy(b, k).total());
}

TEST_CASE("Energy is linear in every constant and components add up", "[energy]") {
    const CostCounts c = sample_counts();
    CostConstants k = CostConstants::unit();
    const double base = tally_energy(c, k).total();
    for (Field f : kFields) {
        CostConstants bumped = k;
        bumped.*f = 3.0;
        CostConstants doubled = k;
        doubled.*f = 5.0;
        const double d1 = tally_energy(c, bumped).total() - base;
        const double d2 = tally_energy(c, doubled).total() - base;
        CHECK(d2 == Approx(2.0 * d1));
    }
    const EnergyReport e = tally_energy(c, k);
    CHECK(e.pe_array + e.acc + e.glb + e.dram + e.finders + e.elementwise + e.leakage == Approx(e.total()));
    CHECK(e.acc == 1344.0);
    CHECK(e.finders == 892.0);
    CHECK(e.elementwise == 190.0);
}

TEST_CASE("Missing constants fail only when used", "[energy]") {
    CostConstants k = CostConstants::unit();
    k.mac.reset();
    CostCounts c = sample_counts();
    CHECK_THROWS_AS(tally_energy(c, k), ConfigError);
    c.ops.macs = 0;
    CHECK_NOTHROW(tally_energy(c, k));

    CostConstants bad = CostConstants::unit();
    bad.dram_byte = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("BE engine counts feed the finder and MAC terms", "[energy]") {
    EngineCycles be;
    be.bound = 77;
    be.ops.macs = 10;
    be.ops.finder_tasks = 10;
    be.ops.finder_scan_bits = 64;
    be.traffic = {0, 300, 0};
    const CostCounts c = engine_counts(be, EngineKind::backward);
    CHECK(c.engine_cycles[1] == 77);
    CHECK(c.engine_cycles[0] == 0);
    CHECK(c.dram_bytes == 300.0);
    const EnergyReport e = tally_energy(c, CostConstants::unit());
    CHECK(e.finders == 74.0);
    CHECK(e.pe_array == 10.0);
}

TEST_CASE("LUT storage", "[storage]") {
    const HardwareConfig hw;
    const LutStorage s = lut_storage_report(hw);
    CHECK(s.forward_bytes == 48u * 1024u);
    CHECK(s.weight_update_bytes == 80u * 1024u);
    const verify::CheckResult r = verify::check_lut_storage({});
    INFO(r.detail);
    CHECK(r.passed);
}
