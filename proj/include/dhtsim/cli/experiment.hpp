#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dhtsim/cli/config.hpp"
#include "dhtsim/sim/scenario.hpp"

namespace dhtsim::cli {

// A sweep over one axis for a set of algorithms; each cell runs the base
// scenario with the axis value substituted, `repeats` seeds per cell.
struct ExperimentSpec {
    sim::ScenarioConfig base;
    std::string axis;  // s | nodes | r | items_per_node | catastrophe_fraction
    std::vector<double> values;
    std::vector<sim::AlgorithmKind> algorithms;
    std::string output_path;
    KvMap raw;

    static ExperimentSpec from_kv(const KvMap& kv);
};

struct CellStats {
    sim::AlgorithmKind algorithm;
    double value = 0.0;
    bool ok = false;
    std::string error;
    unsigned repeats = 0;
    double mean_fetch_hops = 0, se_fetch_hops = 0;
    double mean_probes = 0, se_probes = 0;
    double bw_overhead = 0, se_bw_overhead = 0;
    double bw_movement = 0, se_bw_movement = 0;
    double bw_repair = 0, se_bw_repair = 0;
    double bw_fetch = 0, se_bw_fetch = 0;
    double moved_fraction = 0, se_moved_fraction = 0;
    double success_rate = 1.0;
    double loss_events = 0;
    std::vector<sim::MetricsLog> runs;
};

CellStats aggregate_cell(sim::AlgorithmKind alg, double value,
                         const std::vector<sim::MetricsLog>& runs);

// Applies one axis value to a scenario.
sim::ScenarioConfig apply_axis(const sim::ScenarioConfig& base, const std::string& axis,
                               double value);

// Runs every (algorithm, value) cell, honoring DHTSIM_WORKERS.  Rows are
// emitted in spec order regardless of scheduling.  Returns 0, or 3 when a
// cell failed (its row carries an error status).
int run_experiment(const ExperimentSpec& spec, std::ostream& diagnostics);

// Analysis table emitters: fig1, fig2, fig4, fig5, probes, collision.
int run_analysis(const std::string& kind, const KvMap& params, const std::string& output_path,
                 std::ostream& diagnostics);

// Oracle-equivalence suites; prints one PASS/FAIL line per check.
int run_selftest(std::ostream& out);

// Writes a simulate-command result table.
void write_simulate_csv(std::ostream& out, const KvMap& raw, const sim::ScenarioConfig& cfg,
                        const std::vector<sim::MetricsLog>& runs);

}  // namespace dhtsim::cli
