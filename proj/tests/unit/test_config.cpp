#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include "h2sim/run_config.hpp"
#include "h2sim/simulation.hpp"

using namespace h2sim;
using nlohmann::json;

TEST_CASE("Network strings", "[network]") {
    const auto layers = parse_network("64C3(Encoding)-128C3-AP2-10FC");
    REQUIRE(layers.size() == 4);
    CHECK(layers[0] == LayerSpec::conv(64, 3, 1, true));
    CHECK(layers[1] == LayerSpec::conv(128, 3));
    CHECK(layers[2] == LayerSpec::avg_pool(2));
    CHECK(layers[3] == LayerSpec::fc(10));
    CHECK(format_network(layers) == "64C3(Encoding)-128C3-AP2-10FC");

    const auto strided = parse_network("64C3S2");
    REQUIRE(strided.size() == 1);
    CHECK(strided[0] == LayerSpec::conv(64, 3, 2));

    CHECK_THROWS_AS(parse_network(""), ParseError);
    CHECK_THROWS_AS(parse_network("64C3-"), ParseError);
    CHECK_THROWS_AS(parse_network("64X3"), ParseError);
    CHECK_THROWS_AS(parse_network("10FC-64C3(Encoding)"), ParseError);
}

TEST_CASE("Network plan chains shapes", "[network]") {
    NetworkSpec net;
    net.layers = parse_network("64C3(Encoding)-128C3-AP2-256C3-256C3-AP2-512C3-512C3-512FC-512FC-10FC");
    net.in_c = 3;
    net.in_h = 32;
    net.in_w = 32;
    const NetworkPlan plan = resolve(net);
    CHECK(plan.num_weight_layers() == 9);
    CHECK(plan.num_classes == 10);
    CHECK(plan.weight_layer(6).in == Shape{1, 1, 512, 8, 8});
    CHECK(plan.weight_layer(2).real_input);
    CHECK_FALSE(plan.weight_layer(1).real_input);

    net.layers = parse_network("8C3-AP2");
    CHECK_THROWS(resolve(net));
}

TEST_CASE("Run config JSON roundtrip", "[config]") {
    RunConfig cfg;
    cfg.network = "8C3-4FC";
    cfg.timesteps = 6;
    cfg.hardware.be.parallelism = 8;
    cfg.energy.mac.reset();
    cfg.synthetic.layers.push_back({1, 0.1, 0.2, 0.3});
    cfg.sweep.push_back({"timesteps", {json(2), json(4)}});
    const json doc = to_json(cfg);
    const RunConfig back = run_config_from_json(doc);
    CHECK(to_json(back) == doc);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(doc["energy"]["mac"].is_null());
    CHECK(doc["hardware"]["backward"]["group"] == 8);
}

TEST_CASE("Defaults describe the reference engine configuration", "[config]") {
    const RunConfig cfg = run_config_from_json(json::object());
    const HardwareConfig& hw = cfg.hardware;
    CHECK(hw.fe.pe_rows == 64);
    CHECK(hw.fe.pe_cols == 16);
    CHECK(hw.fe.lut.bytes_per_pe() == 48);
    CHECK(hw.wue.pe_rows == 10);
    CHECK(hw.wue.pe_cols == 128);
    CHECK(hw.wue.lut.bytes_per_pe() == 64);
    CHECK(hw.be.pe_rows == 16);
    CHECK(hw.be.pe_cols == 64);
    CHECK(hw.be.parallelism == 4);
    CHECK(hw.memory.bytes_per_cycle() == 160.0);
}

TEST_CASE("Config errors", "[config]") {
    CHECK_THROWS_AS(run_config_from_json(json{{"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json{{"hardware", {{"backward", {{"grup", 2}}}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json{{"timesteps", "four"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json{{"timesteps", 0}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json{{"mode", "live"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json{{"synthetic", {{"spike_grad_sparsity", 1.5}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json{{"network", "8C3-"}}), ParseError);
}

TEST_CASE("Dotted overrides", "[config]") {
    json doc = json::object();
    apply_override(doc, "hardware.backward.group=8");
    apply_override(doc, "mode=synthetic");
    apply_override(doc, "network=\"16C3-4FC\"");
    apply_override(doc, "energy.mac=null");
    CHECK(doc["hardware"]["backward"]["group"] == 8);
    CHECK(doc["mode"] == "synthetic");
    const RunConfig cfg = run_config_from_json(doc);
    CHECK(cfg.hardware.be.parallelism == 8);
    CHECK(cfg.mode == SimMode::synthetic);
    CHECK(cfg.network == "16C3-4FC");
    CHECK_FALSE(cfg.energy.mac.has_value());

    CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "mode.deeper=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "a..b=1"), ConfigError);
}

TEST_CASE("Config hash is stable and sensitive", "[config]") {
    RunConfig a;
    RunConfig b;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("Per-layer synthetic sparsities", "[config]") {
    SyntheticConfig s;
    s.input_spike_sparsity = 0.8;
    s.spike_grad_sparsity = 0.5;
    s.potential_grad_sparsity = 0.5;
    s.layers.push_back({1, -1, 0.75, -1});
    const auto d = s.densities(3);
    REQUIRE(d.size() == 3);
    CHECK(d[0].input_spikes == Catch::Approx(0.2));
    CHECK(d[1].spike_grad == Catch::Approx(0.25));
    CHECK(d[1].potential_grad == Catch::Approx(0.5));
    s.layers.push_back({7, 0.1, -1, -1});
    CHECK_THROWS_AS(s.densities(3), ConfigError);
}

TEST_CASE("Sweep rows follow point order with the last key fastest", "[sweep]") {
    RunConfig base;
    base.network = "8C3-4FC";
    base.in_c = 4;
    base.in_h = 8;
    base.in_w = 8;
    base.timesteps = 2;
    base.sub_batch = 2;
    base.mode = SimMode::synthetic;
    const SweepResult r = run_sweep(base, {{"hardware.backward.group", {json(1), json(2)}},
                                           {"timesteps", {json(2), json(3), json(4)}}});
    REQUIRE(r.rows.size() == 6);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        CHECK(r.rows[i].point == static_cast<int>(i));
        CHECK(r.rows[i].values[0] == (i < 3 ? 1 : 2));
        CHECK(r.rows[i].values[1] == 2 + static_cast<int>(i % 3));
    }
    const std::string csv = sweep_csv(r);
    CHECK(csv.rfind("point,hardware.backward.group,timesteps,fe_cycles,be_cycles,wue_cycles,total_cycles,", 0) == 0);
    CHECK(csv.find(r.rows[5].config_hash) != std::string::npos);
    CHECK_THROWS_AS(run_sweep(base, {{"hardware.backward.grup", {json(1)}}}), ConfigError);
}
