#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "dhtsim/cli/config.hpp"
#include "dhtsim/cli/experiment.hpp"

using namespace dhtsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

cli::KvMap load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
    cli::KvMap kv = path.empty() ? cli::KvMap{} : cli::load_kv_file(path);
    cli::apply_overrides(kv, sets);
    return kv;
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& sets,
                 const std::string& out_path) {
    cli::KvMap kv = load_with_overrides(config_path, sets);
    sim::ScenarioConfig cfg = cli::scenario_from_kv(kv);
    auto errs = cfg.validate();
    if (!errs.empty()) {
        for (const auto& e : errs) std::cerr << "config error: " << e << "\n";
        return kExitConfig;
    }
    auto runs = sim::run_scenario(cfg);
    if (out_path.empty()) {
        cli::write_simulate_csv(std::cout, kv, cfg, runs);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot write " << out_path << "\n";
            return kExitConfig;
        }
        cli::write_simulate_csv(out, kv, cfg, runs);
    }
    return kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::vector<std::string>& sets,
              const std::string& out_path) {
    cli::KvMap kv = load_with_overrides(spec_path, sets);
    if (!out_path.empty()) kv["output"] = out_path;
    cli::ExperimentSpec spec = cli::ExperimentSpec::from_kv(kv);
    return cli::run_experiment(spec, std::cerr);
}

int cmd_analyze(const std::string& kind, const std::vector<std::string>& sets,
                const std::string& out_path) {
    cli::KvMap kv;
    cli::apply_overrides(kv, sets);
    return cli::run_analysis(kind, kv, out_path, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chord replication simulator and reliability toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::vector<std::string> sets;

    auto* simulate = app.add_subcommand("simulate", "run one scenario, print per-run metrics");
    simulate->add_option("config", config_path, "flat key=value scenario file");
    simulate->add_option("--set", sets, "override key=value")->take_all();
    simulate->add_option("--out", out_path, "CSV output path (default stdout)");

    std::string spec_path, sweep_out;
    std::vector<std::string> sweep_sets;
    auto* sweep = app.add_subcommand("sweep", "run an experiment sweep, emit one CSV");
    sweep->add_option("spec", spec_path, "sweep spec file (scenario keys + sweep.*)")->required();
    sweep->add_option("--set", sweep_sets, "override key=value")->take_all();
    sweep->add_option("--out", sweep_out, "CSV output path (overrides spec output)");

    std::string kind, analyze_out;
    std::vector<std::string> analyze_sets;
    auto* analyze = app.add_subcommand("analyze", "emit an analysis table");
    analyze->add_option("kind", kind, "fig1|fig2|fig4|fig5|probes|collision")->required();
    analyze->add_option("--set", analyze_sets, "parameter key=value")->take_all();
    analyze->add_option("--out", analyze_out, "CSV output path (default stdout)");

    auto* selftest = app.add_subcommand("selftest", "run the oracle-equivalence suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(config_path, sets, out_path);
        if (sweep->parsed()) return cmd_sweep(spec_path, sweep_sets, sweep_out);
        if (analyze->parsed()) return cmd_analyze(kind, analyze_sets, analyze_out);
        if (selftest->parsed()) return cli::run_selftest(std::cout);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitOk;
}
