#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dhtsim/allocation.hpp"
#include "dhtsim/sim/metrics.hpp"
#include "dhtsim/sim/network.hpp"

namespace dhtsim::sim {

enum class AlgorithmKind {
    dhash,
    dyn_successor,
    dyn_predecessor,
    dyn_block,
    dyn_finger,
    dyn_random,
};

const char* to_string(AlgorithmKind kind);
AlgorithmKind algorithm_from_string(const std::string& name);

enum class ChurnMode { none, steady, catastrophe };

const char* to_string(ChurnMode mode);
ChurnMode churn_from_string(const std::string& name);

struct ScenarioConfig {
    unsigned nodes = 200;
    unsigned bits = 32;
    AlgorithmKind algorithm = AlgorithmKind::dhash;
    unsigned dhash_replicas = 6;
    unsigned r_min = 6;
    unsigned r_max = 12;
    unsigned maintenance_per_half_life = 4;  // S
    unsigned items_per_node = 50;
    unsigned item_size = 1024;
    ChurnMode churn = ChurnMode::steady;
    double catastrophe_fraction = 0.0;
    std::uint64_t fetch_count = 50000;
    std::uint64_t seed = 1;
    unsigned repeats = 4;

    unsigned successor_list_len = 10;
    unsigned finger_count = 12;
    unsigned fingers_per_repair = 1;
    Time repair_interval = 1800;       // thirty simulated minutes
    Time replacement_delay = 60;       // new node joins shortly after a failure
    Time half_life = 43200;            // simulated run window
    Time mean_lifetime = 86400;        // per-node exponential lifetime (steady churn)
    bool per_network_churn = false;    // alternative reading: one failure/day system-wide
    bool core_first = true;
    bool remove_single = false;
    unsigned stop_after_empty = 2;
    unsigned fetch_retry_cap = 8;      // 0 = unlimited (forced in catastrophe mode)
    unsigned overload_threshold = 0;
    std::optional<Time> rtt_timeout;
    std::optional<Time> recursive_timeout;
    unsigned warmup_rounds_cap = 8;

    bool is_dynamic() const { return algorithm != AlgorithmKind::dhash; }
    AllocationKind allocation_kind() const;
    TimeoutPolicy timeouts() const;

    // Empty when the configuration is consistent.
    std::vector<std::string> validate() const;
};

// One seeded run; deterministic for a fixed (config, seed).
MetricsLog run_single(const ScenarioConfig& cfg, std::uint64_t seed);

// The configured number of repeats with seeds seed, seed+1, ...
std::vector<MetricsLog> run_scenario(const ScenarioConfig& cfg);

}  // namespace dhtsim::sim
