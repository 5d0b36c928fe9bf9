#include "dhtsim/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dhtsim::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(value, &pos, 0);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + value + "'");
}

}  // namespace

KvMap parse_kv_text(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

KvMap load_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str());
}

void apply_overrides(KvMap& kv, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
}

std::string canonical_text(const KvMap& kv) {
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t config_hash(const KvMap& kv) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : canonical_text(kv)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

const std::vector<std::string>& scenario_keys() {
    static const std::vector<std::string> keys = {
        "nodes", "bits", "algorithm", "r", "r_min", "r_max", "s", "items_per_node", "item_size",
        "churn", "catastrophe_fraction", "fetches", "seed", "repeats", "successor_list_len",
        "finger_count", "fingers_per_repair", "repair_interval", "replacement_delay", "half_life",
        "mean_lifetime", "per_network_churn", "core_first", "remove_single", "stop_after_empty",
        "fetch_retry_cap", "overload_threshold", "rtt_timeout", "recursive_timeout"};
    return keys;
}

sim::ScenarioConfig scenario_from_kv(const KvMap& kv) {
    sim::ScenarioConfig cfg;
    for (const auto& [key, value] : kv) {
        if (key.rfind("sweep.", 0) == 0 || key == "algorithms" || key == "output")
            continue;  // experiment-level keys
        if (key == "nodes") cfg.nodes = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "bits") cfg.bits = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "algorithm") cfg.algorithm = sim::algorithm_from_string(value);
        else if (key == "r") cfg.dhash_replicas = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "r_min") cfg.r_min = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "r_max") cfg.r_max = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "s")
            cfg.maintenance_per_half_life = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "items_per_node")
            cfg.items_per_node = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "item_size") cfg.item_size = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "churn") cfg.churn = sim::churn_from_string(value);
        else if (key == "catastrophe_fraction") cfg.catastrophe_fraction = parse_double(key, value);
        else if (key == "fetches") cfg.fetch_count = parse_u64(key, value);
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "repeats") cfg.repeats = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "successor_list_len")
            cfg.successor_list_len = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "finger_count")
            cfg.finger_count = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "fingers_per_repair")
            cfg.fingers_per_repair = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "repair_interval") cfg.repair_interval = parse_u64(key, value);
        else if (key == "replacement_delay") cfg.replacement_delay = parse_u64(key, value);
        else if (key == "half_life") cfg.half_life = parse_u64(key, value);
        else if (key == "mean_lifetime") cfg.mean_lifetime = parse_u64(key, value);
        else if (key == "per_network_churn") cfg.per_network_churn = parse_bool(key, value);
        else if (key == "core_first") cfg.core_first = parse_bool(key, value);
        else if (key == "remove_single") cfg.remove_single = parse_bool(key, value);
        else if (key == "stop_after_empty")
            cfg.stop_after_empty = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "fetch_retry_cap")
            cfg.fetch_retry_cap = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "overload_threshold")
            cfg.overload_threshold = static_cast<unsigned>(parse_u64(key, value));
        else if (key == "rtt_timeout") cfg.rtt_timeout = parse_u64(key, value);
        else if (key == "recursive_timeout") cfg.recursive_timeout = parse_u64(key, value);
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return cfg;
}

}  // namespace dhtsim::cli
