#include "dhtsim/cli/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dhtsim/analysis.hpp"
#include "dhtsim/bloom.hpp"

namespace dhtsim::cli {

namespace {

constexpr const char* kVersion = "dhtsim 0.1.0";

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad list element for " + key + ": '" + tok + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument(key + ": empty list");
    return out;
}

double kv_num(const KvMap& kv, const std::string& key, double dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stod(it->second);
}

std::string kv_str(const KvMap& kv, const std::string& key, const std::string& dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
}

struct MeanSe {
    double mean = 0, se = 0;
};

MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe out;
    if (xs.empty()) return out;
    double s = 0;
    for (double x : xs) s += x;
    out.mean = s / double(xs.size());
    if (xs.size() > 1) {
        double var = 0;
        for (double x : xs) var += (x - out.mean) * (x - out.mean);
        var /= double(xs.size() - 1);
        out.se = std::sqrt(var / double(xs.size()));
    }
    return out;
}

void write_metadata(std::ostream& out, const KvMap& raw, const sim::ScenarioConfig* cfg) {
    out << "# " << kVersion << "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(config_hash(raw)));
    out << "# config-hash " << buf << "\n";
    if (cfg != nullptr) {
        out << "# seeds ";
        for (unsigned i = 0; i < cfg->repeats; ++i) {
            if (i) out << ",";
            out << cfg->seed + i;
        }
        out << "\n";
    }
}

unsigned worker_count(std::size_t cells) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DHTSIM_WORKERS")) {
        try {
            hw = std::max(1u, static_cast<unsigned>(std::stoul(env)));
        } catch (const std::exception&) {
        }
    }
    return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(1, cells)));
}

}  // namespace

sim::ScenarioConfig apply_axis(const sim::ScenarioConfig& base, const std::string& axis,
                               double value) {
    sim::ScenarioConfig cfg = base;
    if (axis == "s") {
        cfg.maintenance_per_half_life = static_cast<unsigned>(value);
    } else if (axis == "nodes") {
        cfg.nodes = static_cast<unsigned>(value);
    } else if (axis == "r") {
        cfg.dhash_replicas = static_cast<unsigned>(value);
        cfg.r_min = static_cast<unsigned>(value);
        unsigned headroom =
            static_cast<unsigned>(std::ceil(1.645 * std::sqrt(double(cfg.r_min))));
        cfg.r_max = std::max(base.r_max, cfg.r_min + headroom);
    } else if (axis == "items_per_node") {
        cfg.items_per_node = static_cast<unsigned>(value);
    } else if (axis == "catastrophe_fraction") {
        cfg.churn = sim::ChurnMode::catastrophe;
        cfg.catastrophe_fraction = value;
    } else {
        throw std::invalid_argument("unknown sweep axis: " + axis);
    }
    return cfg;
}

ExperimentSpec ExperimentSpec::from_kv(const KvMap& kv) {
    ExperimentSpec spec;
    spec.raw = kv;
    spec.base = scenario_from_kv(kv);
    auto ax = kv.find("sweep.axis");
    if (ax == kv.end()) throw std::invalid_argument("sweep spec: missing sweep.axis");
    spec.axis = ax->second;
    auto vals = kv.find("sweep.values");
    if (vals == kv.end()) throw std::invalid_argument("sweep spec: missing sweep.values");
    spec.values = parse_list("sweep.values", vals->second);
    for (std::size_t i = 1; i < spec.values.size(); ++i)
        if (spec.values[i] <= spec.values[i - 1])
            throw std::invalid_argument("sweep.values must be strictly increasing");
    std::string algos = kv_str(kv, "algorithms",
                               "dhash,dyn-successor,dyn-predecessor,dyn-block,dyn-finger");
    std::stringstream ss(algos);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) spec.algorithms.push_back(sim::algorithm_from_string(tok));
    if (spec.algorithms.empty()) throw std::invalid_argument("sweep spec: empty algorithm list");
    spec.output_path = kv_str(kv, "output", "");
    // validate every cell configuration up front
    for (auto alg : spec.algorithms) {
        for (double v : spec.values) {
            sim::ScenarioConfig cfg = apply_axis(spec.base, spec.axis, v);
            cfg.algorithm = alg;
            auto errs = cfg.validate();
            if (!errs.empty())
                throw std::invalid_argument("cell (" + std::string(sim::to_string(alg)) + "," +
                                            fmt(v) + "): " + errs.front());
        }
    }
    return spec;
}

CellStats aggregate_cell(sim::AlgorithmKind alg, double value,
                         const std::vector<sim::MetricsLog>& runs) {
    CellStats cs;
    cs.algorithm = alg;
    cs.value = value;
    cs.repeats = static_cast<unsigned>(runs.size());
    cs.ok = true;
    std::vector<double> lat, probes, ovh, mov, rep, fet, frac;
    double found = 0, denom = 0, losses = 0;
    for (const auto& m : runs) {
        lat.push_back(m.mean_latency());
        probes.push_back(m.mean_probes());
        ovh.push_back(double(m.bytes(sim::Category::maintenance_overhead)));
        mov.push_back(double(m.bytes(sim::Category::data_movement)));
        rep.push_back(double(m.bytes(sim::Category::chord_repair)));
        fet.push_back(double(m.bytes(sim::Category::fetch)));
        frac.push_back(m.data_moved_fraction());
        found += double(m.fetch_latency.size());
        denom += double(m.fetches_launched - m.extinct_fetches - m.cancelled_fetches);
        losses += double(m.loss_events);
    }
    auto a = mean_se(lat);
    cs.mean_fetch_hops = a.mean;
    cs.se_fetch_hops = a.se;
    a = mean_se(probes);
    cs.mean_probes = a.mean;
    cs.se_probes = a.se;
    a = mean_se(ovh);
    cs.bw_overhead = a.mean;
    cs.se_bw_overhead = a.se;
    a = mean_se(mov);
    cs.bw_movement = a.mean;
    cs.se_bw_movement = a.se;
    a = mean_se(rep);
    cs.bw_repair = a.mean;
    cs.se_bw_repair = a.se;
    a = mean_se(fet);
    cs.bw_fetch = a.mean;
    cs.se_bw_fetch = a.se;
    a = mean_se(frac);
    cs.moved_fraction = a.mean;
    cs.se_moved_fraction = a.se;
    cs.success_rate = denom > 0 ? found / denom : 1.0;
    cs.loss_events = losses / std::max<double>(1.0, double(runs.size()));
    cs.runs = runs;
    return cs;
}

int run_experiment(const ExperimentSpec& spec, std::ostream& diagnostics) {
    struct Cell {
        sim::AlgorithmKind alg;
        double value;
    };
    std::vector<Cell> cells;
    for (auto alg : spec.algorithms)
        for (double v : spec.values) cells.push_back({alg, v});

    std::vector<CellStats> results(cells.size());
    unsigned workers = worker_count(cells.size());
    for (std::size_t base = 0; base < cells.size(); base += workers) {
        std::size_t batch = std::min<std::size_t>(workers, cells.size() - base);
        std::vector<std::future<CellStats>> futs;
        for (std::size_t j = 0; j < batch; ++j) {
            Cell cell = cells[base + j];
            futs.push_back(std::async(std::launch::async, [cell, &spec]() {
                CellStats cs;
                try {
                    sim::ScenarioConfig cfg = apply_axis(spec.base, spec.axis, cell.value);
                    cfg.algorithm = cell.alg;
                    auto runs = sim::run_scenario(cfg);
                    cs = aggregate_cell(cell.alg, cell.value, runs);
                    cs.runs.clear();
                } catch (const std::exception& e) {
                    cs.algorithm = cell.alg;
                    cs.value = cell.value;
                    cs.ok = false;
                    cs.error = e.what();
                }
                return cs;
            }));
        }
        for (std::size_t j = 0; j < batch; ++j) results[base + j] = futs[j].get();
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!spec.output_path.empty()) {
        file.open(spec.output_path, std::ios::binary);
        if (!file) throw std::invalid_argument("cannot write " + spec.output_path);
        out = &file;
    }
    write_metadata(*out, spec.raw, &spec.base);
    *out << "algorithm," << spec.axis
         << ",repeats,mean_fetch_hops,se_fetch_hops,mean_probes,se_probes"
            ",bw_overhead_bytes,se_bw_overhead_bytes,bw_movement_bytes,se_bw_movement_bytes"
            ",bw_repair_bytes,se_bw_repair_bytes,bw_fetch_bytes,se_bw_fetch_bytes"
            ",data_moved_fraction,se_data_moved_fraction,success_rate,loss_events,status\n";
    bool any_failed = false;
    for (const auto& cs : results) {
        *out << sim::to_string(cs.algorithm) << ',' << fmt(cs.value) << ',' << cs.repeats << ','
             << fmt(cs.mean_fetch_hops) << ',' << fmt(cs.se_fetch_hops) << ','
             << fmt(cs.mean_probes) << ',' << fmt(cs.se_probes) << ',' << fmt(cs.bw_overhead)
             << ',' << fmt(cs.se_bw_overhead) << ',' << fmt(cs.bw_movement) << ','
             << fmt(cs.se_bw_movement) << ',' << fmt(cs.bw_repair) << ',' << fmt(cs.se_bw_repair)
             << ',' << fmt(cs.bw_fetch) << ',' << fmt(cs.se_bw_fetch) << ','
             << fmt(cs.moved_fraction) << ',' << fmt(cs.se_moved_fraction) << ','
             << fmt(cs.success_rate) << ',' << fmt(cs.loss_events) << ','
             << (cs.ok ? "ok" : "error") << '\n';
        if (!cs.ok) {
            any_failed = true;
            diagnostics << "cell (" << sim::to_string(cs.algorithm) << "," << fmt(cs.value)
                        << ") failed: " << cs.error << "\n";
        }
    }
    return any_failed ? 3 : 0;
}

void write_simulate_csv(std::ostream& out, const KvMap& raw, const sim::ScenarioConfig& cfg,
                        const std::vector<sim::MetricsLog>& runs) {
    write_metadata(out, raw, &cfg);
    out << "seed,fetches,found,not_found,extinct,cancelled,mean_fetch_hops,mean_probes"
           ",bw_overhead_bytes,bw_movement_bytes,bw_repair_bytes,bw_fetch_bytes"
           ",data_moved_fraction,loss_events,events,trace_hash\n";
    for (const auto& m : runs) {
        char trace[32];
        std::snprintf(trace, sizeof trace, "%016llx",
                      static_cast<unsigned long long>(m.trace_hash));
        out << m.seed << ',' << m.fetches_launched << ',' << m.fetch_latency.size() << ','
            << m.fetch_failures << ',' << m.extinct_fetches << ',' << m.cancelled_fetches << ','
            << fmt(m.mean_latency()) << ',' << fmt(m.mean_probes()) << ','
            << m.bytes(sim::Category::maintenance_overhead) << ','
            << m.bytes(sim::Category::data_movement) << ','
            << m.bytes(sim::Category::chord_repair) << ',' << m.bytes(sim::Category::fetch) << ','
            << fmt(m.data_moved_fraction()) << ',' << m.loss_events << ',' << m.events << ','
            << trace << '\n';
    }
}

// ---------------------------------------------------------------------------
// analysis tables

namespace {

std::ostream& open_output(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw std::invalid_argument("cannot write " + path);
    return file;
}

int analysis_fig1(const KvMap& kv, const std::string& path) {
    unsigned n = static_cast<unsigned>(kv_num(kv, "n", 500));
    double target = kv_num(kv, "target", 1e-6);
    unsigned r_from = static_cast<unsigned>(kv_num(kv, "r_from", 4));
    unsigned r_to = static_cast<unsigned>(kv_num(kv, "r_to", 20));
    bool refined = kv_num(kv, "refined", 0) != 0;
    std::ofstream file;
    std::ostream& out = open_output(file, path);
    write_metadata(out, kv, nullptr);
    out << "r,s_min\n";
    for (unsigned r = r_from; r <= r_to; ++r) {
        auto s = min_repairs(n, r, target, refined);
        out << r << ',' << (s ? std::to_string(*s) : "unreachable") << '\n';
    }
    return 0;
}

int analysis_fig2(const KvMap& kv, const std::string& path) {
    auto ns = parse_list("n_list", kv_str(kv, "n_list", "50,100,200,500"));
    auto rs = parse_list("r_list", kv_str(kv, "r_list", "6,8,10,12,15"));
    double target = kv_num(kv, "target", 1e-6);
    bool refined = kv_num(kv, "refined", 0) != 0;
    std::ofstream file;
    std::ostream& out = open_output(file, path);
    write_metadata(out, kv, nullptr);
    out << "n,r,s_min\n";
    for (double r : rs)
        for (double n : ns) {
            auto s = min_repairs(static_cast<unsigned>(n), static_cast<unsigned>(r), target,
                                 refined);
            out << static_cast<unsigned>(n) << ',' << static_cast<unsigned>(r) << ','
                << (s ? std::to_string(*s) : "unreachable") << '\n';
        }
    return 0;
}

std::vector<AllocationKind> parse_kinds(const std::string& text) {
    std::vector<AllocationKind> kinds;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) kinds.push_back(allocation_kind_from_string(tok));
    if (kinds.empty()) throw std::invalid_argument("empty allocation kind list");
    return kinds;
}

int analysis_fig45(const KvMap& kv, const std::string& path, bool fig5) {
    PlacementModel model;
    model.nodes = static_cast<std::uint64_t>(kv_num(kv, "n", 500));
    model.failed_count = static_cast<std::uint64_t>(kv_num(kv, "failed", 250));
    model.samples = static_cast<std::uint64_t>(kv_num(kv, "samples", 100000));
    model.bits = static_cast<unsigned>(kv_num(kv, "bits", 32));
    model.seed = static_cast<std::uint64_t>(kv_num(kv, "seed", 1));
    auto kinds = parse_kinds(kv_str(kv, "kinds", "block,successor,finger,random"));
    auto rl = parse_list("r_list", kv_str(kv, "r_list", "8,10,12,14,16,18"));
    std::vector<unsigned> rs;
    for (double r : rl) rs.push_back(static_cast<unsigned>(r));

    auto grid = placement_loss_grid(model, kinds, rs);
    std::ofstream file;
    std::ostream& out = open_output(file, path);
    write_metadata(out, kv, nullptr);
    if (fig5)
        out << "kind,r,loss_samples,mean_loss_fraction,se_loss_fraction\n";
    else
        out << "kind,r,samples,losses,p_loss,wilson_lo,wilson_hi\n";
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        for (std::size_t ri = 0; ri < rs.size(); ++ri) {
            const PlacementLoss& pl = grid[ki * rs.size() + ri];
            if (fig5)
                out << to_string(kinds[ki]) << ',' << rs[ri] << ',' << pl.loss_samples << ','
                    << fmt(pl.mean_loss_fraction) << ',' << fmt(pl.se_loss_fraction) << '\n';
            else
                out << to_string(kinds[ki]) << ',' << rs[ri] << ',' << pl.samples << ','
                    << pl.loss_samples << ',' << fmt(pl.loss_probability) << ','
                    << fmt(pl.ci.lo) << ',' << fmt(pl.ci.hi) << '\n';
        }
    }
    return 0;
}

int analysis_probes(const KvMap& kv, const std::string& path) {
    auto ss = parse_list("s_list", kv_str(kv, "s_list", "1,2,4,8"));
    std::ofstream file;
    std::ostream& out = open_output(file, path);
    write_metadata(out, kv, nullptr);
    out << "s,expected_probes\n";
    for (double s : ss)
        out << static_cast<unsigned>(s) << ',' << fmt(expected_probes(static_cast<unsigned>(s)))
            << '\n';
    return 0;
}

int analysis_collision(const KvMap& kv, const std::string& path) {
    auto rs = parse_list("r_list", kv_str(kv, "r_list", "4,9,16"));
    std::uint64_t n = static_cast<std::uint64_t>(kv_num(kv, "n", 500));
    unsigned bits = static_cast<unsigned>(kv_num(kv, "bits", 32));
    std::uint64_t trials = static_cast<std::uint64_t>(kv_num(kv, "trials", 100000));
    std::uint64_t seed = static_cast<std::uint64_t>(kv_num(kv, "seed", 1));
    RingSpace ring(bits);
    std::ofstream file;
    std::ostream& out = open_output(file, path);
    write_metadata(out, kv, nullptr);
    out << "r,bound_keys,coverage,trials\n";
    for (double rd : rs) {
        unsigned r = static_cast<unsigned>(rd);
        double bound = collision_bound(r, ring.size(), n);
        double cov = collision_bound_coverage(r, ring.size(), n, trials, seed);
        out << r << ',' << fmt(bound) << ',' << fmt(cov) << ',' << trials << '\n';
    }
    return 0;
}

}  // namespace

int run_analysis(const std::string& kind, const KvMap& params, const std::string& output_path,
                 std::ostream& diagnostics) {
    if (kind == "fig1") return analysis_fig1(params, output_path);
    if (kind == "fig2") return analysis_fig2(params, output_path);
    if (kind == "fig4") return analysis_fig45(params, output_path, false);
    if (kind == "fig5") return analysis_fig45(params, output_path, true);
    if (kind == "probes") return analysis_probes(params, output_path);
    if (kind == "collision") return analysis_collision(params, output_path);
    diagnostics << "unknown analysis kind: " << kind
                << " (expected fig1|fig2|fig4|fig5|probes|collision)\n";
    return 2;
}

// ---------------------------------------------------------------------------
// selftest

int run_selftest(std::ostream& out) {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        out << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    {
        double worst = 0;
        for (int pi = 1; pi <= 19; ++pi) {
            double p = 0.05 * pi;
            for (unsigned r = 1; r <= 8; ++r)
                for (unsigned n = 1; n <= 64; ++n) {
                    double a = run_probability({p, r, n});
                    double b = run_probability_oracle({p, r, n});
                    worst = std::max(worst, std::abs(a - b));
                }
        }
        check("run_probability matches dynamic-program oracle (<=1e-12)", worst <= 1e-12);
    }
    {
        double worst = 0;
        for (double p : {0.25, 0.5, 0.8})
            for (unsigned r : {1u, 2u, 3u, 5u})
                for (unsigned n : {4u, 9u, 16u}) {
                    double a = run_probability({p, r, n});
                    double b = run_probability_exhaustive({p, r, n});
                    worst = std::max(worst, std::abs(a - b));
                }
        check("run_probability matches exhaustive enumeration (n<=16)", worst <= 1e-12);
    }
    check("run_probability(0.5,2,3) = 3/8",
          std::abs(run_probability({0.5, 2, 3}) - 0.375) < 1e-15);
    {
        bool mono = true;
        for (unsigned n : {16u, 64u}) {
            double prev = -1;
            for (int pi = 1; pi <= 19; ++pi) {
                double v = run_probability({0.05 * pi, 4, n});
                if (v + 1e-15 < prev) mono = false;
                prev = v;
            }
        }
        check("run_probability monotone in p", mono);
    }
    {
        BloomFilter bf(10000);
        Rng rng(7);
        std::vector<std::uint64_t> keys;
        for (int i = 0; i < 10000; ++i) keys.push_back(rng.next());
        for (auto k : keys) bf.insert(k);
        bool ok = true;
        for (auto k : keys)
            if (!bf.may_contain(k)) ok = false;
        check("bloom filter: zero false negatives on 10^4 keys", ok);
    }
    {
        sim::ScenarioConfig cfg;
        cfg.nodes = 16;
        cfg.items_per_node = 4;
        cfg.fetch_count = 64;
        cfg.maintenance_per_half_life = 2;
        cfg.half_life = 4000;
        cfg.mean_lifetime = 8000;
        cfg.repeats = 1;
        cfg.algorithm = sim::AlgorithmKind::dyn_block;
        auto a = sim::run_single(cfg, 11);
        auto b = sim::run_single(cfg, 11);
        check("determinism: identical seed gives identical MetricsLog", a == b);
    }
    out << (failures == 0 ? "selftest: all checks passed\n" : "selftest: FAILURES\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace dhtsim::cli
