#include "h2sim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "h2sim/error.hpp"
#include "h2sim/run_config.hpp"
#include "h2sim/simulation.hpp"
#include "h2sim/verify/suites.hpp"

namespace h2sim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string out = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "JSON run configuration (built-in defaults when omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", args.sets, "Override a config field, e.g. --set hardware.backward.group=8")
        ->take_all()
        ->allow_extra_args(false);
    cmd->add_option("--out", args.out, "Output directory")->capture_default_str();
}

RunConfig load(const CommonArgs& args) {
    json doc = json::object();
    if (!args.config.empty()) {
        std::ifstream in(args.config);
        if (!in) throw ConfigError("config: cannot open " + args.config);
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config: " + args.config + ": " + e.what());
        }
    }
    for (const std::string& s : args.sets) apply_override(doc, s);
    return run_config_from_json(doc);
}

/// "key=v1,v2,..." with every value parsed as JSON when possible.
SweepParameter parse_sweep(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
        throw ConfigError("sweep: expected key=v1,v2,... but got '" + text + "'");
    SweepParameter p;
    p.key = text.substr(0, eq);
    std::string rest = text.substr(eq + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
        const auto comma = rest.find(',', start);
        const std::string item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        json v = json::parse(item, nullptr, false);
        p.values.push_back(v.is_discarded() ? json(item) : v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return p;
}

int cmd_verify(const CommonArgs& args, const verify::SuiteOptions& opt, std::ostream& out) {
    const RunConfig cfg = load(args);
    cfg.validate();
    json doc = {{"schema", "h2sim.verify/1"},
                {"config_hash", config_hash(cfg)},
                {"seed", opt.seed},
                {"fixtures", opt.fixtures},
                {"tiles", opt.tiles}};
    json checks = json::array();
    bool all = true;
    for (const verify::Suite& suite : verify::all_suites()) {
        const verify::CheckResult r = suite.run(opt);
        all = all && r.passed;
        out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases): " << r.detail << "\n";
        checks.push_back({{"name", r.name}, {"passed", r.passed}, {"cases", r.cases}, {"detail", r.detail}});
    }
    doc["checks"] = checks;
    doc["passed"] = all;
    const fs::path file = fs::path(args.out) / "verify.json";
    write_text_file(file, doc.dump(2) + "\n");
    out << (all ? "all checks passed" : "verification FAILED") << "; wrote " << file.string() << "\n";
    return all ? 0 : 1;
}

int cmd_simulate(const CommonArgs& args, std::ostream& out) {
    const RunConfig cfg = load(args);
    const SimulationReport rep = simulate(cfg);
    const fs::path dir(args.out);
    write_text_file(dir / cfg.report_file, report_json(rep).dump(2) + "\n");
    write_text_file(dir / cfg.layers_file, layers_csv(rep));
    out << "network     " << cfg.network << "\n";
    out << "config hash " << rep.config_hash << "\n";
    out << "step cycles " << rep.schedule.total << " (sequential " << rep.schedule.sequential << ", G "
        << rep.schedule.batch_group << ")\n";
    out << "busy        FE " << rep.schedule.fe_busy << "  BE " << rep.schedule.be_busy << "  WUE "
        << rep.schedule.wue_busy << "\n";
    out << "energy      " << rep.energy.total() << "\n";
    if (rep.loss) out << "loss        " << *rep.loss << "\n";
    out << "wrote " << (dir / cfg.report_file).string() << " and " << (dir / cfg.layers_file).string() << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::vector<std::string>& extra, std::ostream& out) {
    const RunConfig cfg = load(args);
    std::vector<SweepParameter> params = cfg.sweep;
    for (const std::string& s : extra) params.push_back(parse_sweep(s));
    if (params.empty()) throw ConfigError("sweep: no parameters (config \"sweep\" or --sweep key=v1,v2)");
    const SweepResult res = run_sweep(cfg, params);
    const fs::path file = fs::path(args.out) / cfg.sweep_file;
    write_text_file(file, sweep_csv(res));
    out << res.rows.size() << " points; wrote " << file.string() << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"H2Learn training accelerator simulator"};
    app.require_subcommand(1);

    CommonArgs verify_args;
    verify::SuiteOptions suite_opt;
    auto* verify = app.add_subcommand("verify", "Run the functional and cycle-model verification suites");
    add_common(verify, verify_args);
    verify->add_option("--seed", suite_opt.seed, "Fixture seed")->capture_default_str();
    verify->add_option("--fixtures", suite_opt.fixtures, "Random networks per equivalence suite")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    verify->add_option("--tiles", suite_opt.tiles, "Random tiles per sparse-backward suite")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    CommonArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Simulate one training iteration and write report.json and layers.csv");
    add_common(sim, sim_args);

    CommonArgs sweep_args;
    std::vector<std::string> sweep_extra;
    auto* sweep = app.add_subcommand("sweep", "Simulate every point of a parameter grid and write sweep.csv");
    add_common(sweep, sweep_args);
    sweep->add_option("--sweep", sweep_extra, "Extra swept parameter, key=v1,v2,...")->take_all()->allow_extra_args(false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << e.what() << "\n";
            return 0;
        }
        err << "h2sim: " << e.what() << "\n";
        if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
            err << sub->help();
        else
            err << app.help();
        return 2;
    }

    try {
        if (verify->parsed()) return cmd_verify(verify_args, suite_opt, out);
        if (sim->parsed()) return cmd_simulate(sim_args, out);
        return cmd_sweep(sweep_args, sweep_extra, out);
    } catch (const Error& e) {
        err << "h2sim: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "h2sim: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace h2sim
