#include <catch_amalgamated.hpp>

#include <vector>

#include "h2sim/pipeline.hpp"
#include "h2sim/verify/suites.hpp"

using namespace h2sim;

namespace {

// One layer whose backward is BE only, so BW equals the BE cycles.
std::vector<LayerStageCycles> one_layer(std::uint64_t fe, std::uint64_t bw) { return {{fe, bw, 0}}; }

}  // namespace

TEST_CASE("Sub-batch pipeline recurrence", "[pipeline]") {
    CHECK(schedule_training_step(one_layer(100, 150), 4).total == 700);
    CHECK(schedule_training_step(one_layer(150, 100), 4).total == 700);

    const ScheduleReport g1 = schedule_training_step(one_layer(100, 150), 1);
    CHECK(g1.total == 250);
    CHECK(g1.total == g1.sequential);

    CHECK(schedule_training_step(one_layer(100, 0), 5).total == 500);
    CHECK(schedule_training_step(one_layer(100, 150), 4, 30).total == 730);
}

TEST_CASE("Backward timeline overlaps BE and WUE", "[pipeline]") {
    // Layers bottom-up; BE runs top-down and WUE waits for both its input and the engine.
    const std::vector<LayerStageCycles> layers{{10, 5, 20}, {10, 7, 3}, {10, 4, 9}};
    const BackwardTimeline t = backward_timeline(layers);
    CHECK(t.be_finish == std::vector<std::uint64_t>{16, 11, 4});
    CHECK(t.wue_start == std::vector<std::uint64_t>{16, 13, 4});
    CHECK(t.wue_finish == std::vector<std::uint64_t>{36, 16, 13});
    CHECK(t.total == 36);
}

TEST_CASE("Utilization is busy over total", "[pipeline]") {
    const ScheduleReport r = schedule_training_step(one_layer(100, 150), 4);
    CHECK(r.fe_busy == 400);
    CHECK(r.be_busy == 600);
    CHECK(r.fe_utilization == Catch::Approx(400.0 / 700.0));
}

TEST_CASE("Weight apply streams w, grad w and w back", "[pipeline]") {
    NetworkSpec net;
    net.layers = parse_network("8C3-10FC");
    net.in_c = 2;
    net.in_h = 4;
    net.in_w = 4;
    const NetworkPlan plan = resolve(net);
    const std::uint64_t weights = 9 * 2 * 8 + 8 * 16 * 10;
    CHECK(weight_apply_cycles(plan, MemoryConfig{}) == (6 * weights + 159) / 160);
}

TEST_CASE("Random schedules never beat the sequential bound", "[pipeline]") {
    const verify::CheckResult r = verify::check_pipeline_property({});
    INFO(r.detail);
    CHECK(r.passed);
}
