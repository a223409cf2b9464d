#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "h2sim/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "h2sim");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = h2sim::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path config_dir() {
    const char* dir = std::getenv("H2SIM_CONFIG_DIR");
    return dir ? fs::path(dir) : fs::path("configs");
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("h2sim_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("Usage errors exit with 2", "[cli]") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"simulate", "--config", "/no/such/file.json"}).code == 2);
    const Run bad = run({"simulate", "--set", "bogus=1", "--out", scratch("bad").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("bogus") != std::string::npos);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("verify passes on the shipped fixtures", "[cli]") {
    const fs::path out = scratch("verify");
    const Run r = run({"verify", "--config", (config_dir() / "default.json").string(), "--fixtures", "16", "--tiles",
                       "100", "--out", out.string()});
    INFO(r.out << r.err);
    CHECK(r.code == 0);
    const json doc = json::parse(slurp(out / "verify.json"));
    CHECK(doc["passed"] == true);
    CHECK(doc["checks"].size() == 14);
    CHECK(doc["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("simulate writes byte-identical reports", "[cli]") {
    const fs::path a = scratch("sim_a");
    const fs::path b = scratch("sim_b");
    const std::string cfg = (config_dir() / "default.json").string();
    REQUIRE(run({"simulate", "--config", cfg, "--out", a.string()}).code == 0);
    REQUIRE(run({"simulate", "--config", cfg, "--out", b.string()}).code == 0);
    const std::string ra = slurp(a / "report.json");
    CHECK(ra == slurp(b / "report.json"));
    CHECK(slurp(a / "layers.csv") == slurp(b / "layers.csv"));

    const json doc = json::parse(ra);
    CHECK(doc["schema"] == "h2sim.report/1");
    CHECK(doc["layers"].size() == 3);
    CHECK(doc["schedule"]["total_cycles"].get<std::uint64_t>() > 0);

    const fs::path c = scratch("sim_c");
    REQUIRE(run({"simulate", "--config", cfg, "--set", "seed=2", "--out", c.string()}).code == 0);
    CHECK(json::parse(slurp(c / "report.json"))["config_hash"] != doc["config_hash"]);
}

TEST_CASE("CIFAR10 network with measured backward sparsities", "[cli]") {
    const fs::path out = scratch("cifar");
    const Run r = run({"simulate", "--config", (config_dir() / "cifar10_synthetic.json").string(), "--out", out.string()});
    INFO(r.out << r.err);
    REQUIRE(r.code == 0);
    const json doc = json::parse(slurp(out / "report.json"));
    REQUIRE(doc["layers"].size() == 9);
    for (const json& l : doc["layers"]) {
        CHECK(l["forward"]["cycles"]["bound"].get<std::uint64_t>() > 0);
        CHECK(l["weight_update"]["cycles"]["bound"].get<std::uint64_t>() > 0);
    }
    CHECK(doc["layers"][0]["forward"]["dense_input"] == true);
}

TEST_CASE("BE group sweep is monotone", "[cli]") {
    const fs::path out = scratch("sweep");
    const Run r = run({"sweep", "--config", (config_dir() / "be_group_sweep.json").string(), "--out", out.string()});
    INFO(r.out << r.err);
    REQUIRE(r.code == 0);
    const auto rows = read_csv(slurp(out / "sweep.csv"));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0][0] == "point");
    CHECK(rows[0][1] == "hardware.backward.group");
    CHECK(rows[0][3] == "be_cycles");
    CHECK(rows[0].back() == "config_hash");
    for (std::size_t i = 2; i < rows.size(); ++i) {
        CHECK(rows[i][0] == std::to_string(i - 1));
        CHECK(std::stoull(rows[i][3]) <= std::stoull(rows[i - 1][3]));
    }
    CHECK(std::stoull(rows[4][3]) < std::stoull(rows[1][3]));
}

TEST_CASE("sweep accepts parameters on the command line", "[cli]") {
    const fs::path out = scratch("sweep_cli");
    const Run r = run({"sweep", "--config", (config_dir() / "be_group_sweep.json").string(), "--set", "sweep=[]",
                       "--sweep", "hardware.memory.bandwidth_gb_s=64,128", "--out", out.string()});
    INFO(r.out << r.err);
    REQUIRE(r.code == 0);
    const auto rows = read_csv(slurp(out / "sweep.csv"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][1] == "64");
    CHECK(std::stoull(rows[2][5]) <= std::stoull(rows[1][5]));
    CHECK(run({"sweep", "--config", (config_dir() / "default.json").string(), "--out", out.string()}).code == 2);
}
