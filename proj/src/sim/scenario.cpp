#include "dhtsim/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <stdexcept>

#include "dhtsim/sim/dhash.hpp"
#include "dhtsim/sim/dynamic.hpp"
#include "dhtsim/sim/node.hpp"

namespace dhtsim::sim {

const char* to_string(AlgorithmKind kind) {
    switch (kind) {
        case AlgorithmKind::dhash: return "dhash";
        case AlgorithmKind::dyn_successor: return "dyn-successor";
        case AlgorithmKind::dyn_predecessor: return "dyn-predecessor";
        case AlgorithmKind::dyn_block: return "dyn-block";
        case AlgorithmKind::dyn_finger: return "dyn-finger";
        case AlgorithmKind::dyn_random: return "dyn-random";
    }
    return "?";
}

AlgorithmKind algorithm_from_string(const std::string& name) {
    if (name == "dhash") return AlgorithmKind::dhash;
    if (name == "dyn-successor") return AlgorithmKind::dyn_successor;
    if (name == "dyn-predecessor") return AlgorithmKind::dyn_predecessor;
    if (name == "dyn-block") return AlgorithmKind::dyn_block;
    if (name == "dyn-finger") return AlgorithmKind::dyn_finger;
    if (name == "dyn-random") return AlgorithmKind::dyn_random;
    throw std::invalid_argument("unknown algorithm: " + name);
}

const char* to_string(ChurnMode mode) {
    switch (mode) {
        case ChurnMode::none: return "none";
        case ChurnMode::steady: return "steady";
        case ChurnMode::catastrophe: return "catastrophe";
    }
    return "?";
}

ChurnMode churn_from_string(const std::string& name) {
    if (name == "none") return ChurnMode::none;
    if (name == "steady") return ChurnMode::steady;
    if (name == "catastrophe") return ChurnMode::catastrophe;
    throw std::invalid_argument("unknown churn mode: " + name);
}

AllocationKind ScenarioConfig::allocation_kind() const {
    switch (algorithm) {
        case AlgorithmKind::dyn_successor: return AllocationKind::successor;
        case AlgorithmKind::dyn_predecessor: return AllocationKind::predecessor;
        case AlgorithmKind::dyn_block: return AllocationKind::block;
        case AlgorithmKind::dyn_finger: return AllocationKind::finger;
        case AlgorithmKind::dyn_random: return AllocationKind::random;
        case AlgorithmKind::dhash: break;
    }
    throw std::logic_error("allocation_kind on dhash");
}

TimeoutPolicy ScenarioConfig::timeouts() const {
    TimeoutPolicy p = timeout_policy(nodes);
    if (rtt_timeout) p.rtt_hops = *rtt_timeout;
    if (recursive_timeout) p.recursive_hops = *recursive_timeout;
    return p;
}

std::vector<std::string> ScenarioConfig::validate() const {
    std::vector<std::string> errs;
    if (nodes < 2) errs.push_back("nodes must be >= 2");
    if (bits < 8 || bits > 63) errs.push_back("bits must be in [8, 63]");
    if (nodes >= (std::uint64_t{1} << bits)) errs.push_back("nodes must be << 2^bits");
    if (items_per_node == 0) errs.push_back("items_per_node must be positive");
    if (item_size == 0) errs.push_back("item_size must be positive");
    if (maintenance_per_half_life == 0) errs.push_back("maintenance runs per half life must be >= 1");
    if (fetch_count == 0) errs.push_back("fetch_count must be positive");
    if (repeats == 0) errs.push_back("repeats must be >= 1");
    if (catastrophe_fraction < 0.0 || catastrophe_fraction >= 1.0)
        errs.push_back("catastrophe_fraction must be in [0, 1)");
    if (half_life == 0) errs.push_back("half_life must be positive");
    if (successor_list_len == 0) errs.push_back("successor_list_len must be >= 1");
    if (finger_count == 0 || finger_count > bits) errs.push_back("finger_count must be in [1, bits]");
    if (algorithm == AlgorithmKind::dhash) {
        if (dhash_replicas == 0) errs.push_back("r must be >= 1");
    } else {
        AllocationConfig cfg;
        cfg.kind = allocation_kind();
        cfg.ring = RingSpace(bits);
        cfg.n = nodes;
        cfg.r_min = r_min;
        cfg.r_max = r_max;
        try {
            cfg.validate();
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
    }
    return errs;
}

namespace {

class Scenario {
public:
    Scenario(const ScenarioConfig& cfg, std::uint64_t seed)
        : cfg_(cfg), rng_(seed), ring_(cfg.bits), net_(engine_, ring_, rng_, cfg.timeouts()) {
        metrics_.seed = seed;
    }

    MetricsLog run();

private:
    std::unique_ptr<Storage> make_storage(Node& node) const;
    NodeId fresh_id();
    Node* spawn_node(NodeId id);
    void build_ring();
    void load_items();
    bool warmup();
    void start_timers(Node* node, bool randomize_phase);
    void schedule_maintenance(NodeId id, Time when, Time interval);
    void schedule_repair(NodeId id, Time when);
    void schedule_steady_churn();
    void schedule_node_death(NodeId id);
    void fail_node(Node* node);
    Task replace_node();
    void schedule_workload();
    Task fetch_task(Key key);
    void finish_if_done();
    void final_scan();

    NodeId random_live();

    ScenarioConfig cfg_;
    Rng rng_;
    RingSpace ring_;
    Engine engine_;
    Network net_;
    MetricsLog metrics_;
    MetricsLog warmup_metrics_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::set<NodeId> used_ids_;
    std::vector<NodeId> live_ids_;  // O(1) uniform origin draws
    std::vector<Key> keys_;
    Time window_end_ = 0;
    bool bandwidth_window_open_ = true;
    std::uint64_t fetches_done_ = 0;
    bool churn_active_ = false;
};

std::unique_ptr<Storage> Scenario::make_storage(Node& node) const {
    if (cfg_.algorithm == AlgorithmKind::dhash) {
        DhashParams p;
        p.replicas = cfg_.dhash_replicas;
        p.fetch_retry_cap = cfg_.churn == ChurnMode::catastrophe ? 0 : cfg_.fetch_retry_cap;
        return std::make_unique<DhashStorage>(node, p);
    }
    DynamicParams p;
    p.alloc.kind = cfg_.allocation_kind();
    p.alloc.ring = ring_;
    p.alloc.n = cfg_.nodes;
    p.alloc.r_min = cfg_.r_min;
    p.alloc.r_max = cfg_.r_max;
    p.alloc.random_key = splitmix64(metrics_.seed ^ 0x5dee5eedull);
    p.core_first = cfg_.core_first;
    p.remove_single = cfg_.remove_single;
    p.stop_after_empty = cfg_.stop_after_empty;
    p.fetch_retry_cap = cfg_.churn == ChurnMode::catastrophe ? 0 : cfg_.fetch_retry_cap;
    p.overload_threshold = cfg_.overload_threshold;
    return std::make_unique<DynamicStorage>(node, p);
}

NodeId Scenario::fresh_id() {
    for (;;) {
        NodeId id = rng_.below(ring_.size());
        if (id != 0 && used_ids_.insert(id).second) return id;
    }
}

Node* Scenario::spawn_node(NodeId id) {
    NodeParams params;
    params.successor_list_len = cfg_.successor_list_len;
    params.finger_count = cfg_.finger_count;
    params.fingers_per_repair = cfg_.fingers_per_repair;
    nodes_.push_back(std::make_unique<Node>(net_, id, params));
    Node* node = nodes_.back().get();
    node->storage = make_storage(*node);
    live_ids_.push_back(id);
    return node;
}

void Scenario::build_ring() {
    std::vector<NodeId> ids;
    ids.reserve(cfg_.nodes);
    for (unsigned i = 0; i < cfg_.nodes; ++i) ids.push_back(fresh_id());
    std::sort(ids.begin(), ids.end());
    for (NodeId id : ids) spawn_node(id);

    const std::size_t n = ids.size();
    for (std::size_t i = 0; i < n; ++i) {
        Node* node = net_.find(ids[i]);
        node->predecessor = ids[(i + n - 1) % n];
        std::vector<NodeId> chain;
        for (std::size_t k = 1; k <= cfg_.successor_list_len && k < n; ++k)
            chain.push_back(ids[(i + k) % n]);
        if (!chain.empty()) node->set_successor_chain(chain.front(), chain);
        for (unsigned f = 0; f < cfg_.finger_count; ++f)
            node->fingers[f] = net_.oracle_owner(node->finger_target(f));
    }
}

void Scenario::load_items() {
    const std::uint64_t total = std::uint64_t{1} * cfg_.items_per_node * cfg_.nodes;
    std::optional<AllocationConfig> acfg;
    if (cfg_.is_dynamic()) {
        acfg.emplace();
        acfg->kind = cfg_.allocation_kind();
        acfg->ring = ring_;
        acfg->n = cfg_.nodes;
        acfg->r_min = cfg_.r_min;
        acfg->r_max = cfg_.r_max;
        acfg->random_key = splitmix64(metrics_.seed ^ 0x5dee5eedull);
    }
    std::set<Key> seen;
    while (keys_.size() < total) {
        Key k = rng_.below(ring_.size());
        if (!seen.insert(k).second) continue;
        keys_.push_back(k);
        DataItem item{k, cfg_.item_size, 1};
        std::uint64_t place = acfg ? allocate(*acfg, 1, k) : k;
        net_.find(net_.oracle_owner(place))->storage->store().upsert(item);
    }
    metrics_.total_payload_bytes = total * cfg_.item_size;
    warmup_metrics_.total_payload_bytes = metrics_.total_payload_bytes;
}

bool Scenario::warmup() {
    net_.attach_metrics(&warmup_metrics_);
    const bool trace = std::getenv("DHTSIM_TRACE_WARMUP") != nullptr;
    std::uint64_t moved_before = 0;
    for (unsigned round = 0; round < cfg_.warmup_rounds_cap; ++round) {
        for (auto& node : nodes_)
            if (node->alive) node->storage->maintenance_round();
        engine_.run();
        std::uint64_t moved = warmup_metrics_.bytes(Category::data_movement);
        if (trace)
            std::fprintf(stderr, "warmup round %u: moved=%llu total-movement-msgs=%llu\n", round,
                         static_cast<unsigned long long>(moved - moved_before),
                         static_cast<unsigned long long>(
                             warmup_metrics_.messages(Category::data_movement)));
        if (moved == moved_before && round > 0) return true;
        moved_before = moved;
    }
    return false;
}

void Scenario::schedule_maintenance(NodeId id, Time when, Time interval) {
    engine_.at(when, EventTag::timer_fire, [this, id, interval]() {
        Node* node = net_.find(id);
        if (node != nullptr && node->alive) {
            node->storage->maintenance_round();
            schedule_maintenance(id, engine_.now() + interval, interval);
        }
    });
}

void Scenario::schedule_repair(NodeId id, Time when) {
    engine_.at(when, EventTag::timer_fire, [this, id]() {
        Node* node = net_.find(id);
        if (node != nullptr && node->alive) {
            node->stabilize();
            schedule_repair(id, engine_.now() + cfg_.repair_interval);
        }
    });
}

void Scenario::start_timers(Node* node, bool randomize_phase) {
    const Time interval = std::max<Time>(1, cfg_.half_life / cfg_.maintenance_per_half_life);
    Time mphase = randomize_phase ? rng_.below(interval) + 1 : interval;
    Time rphase = randomize_phase ? rng_.below(cfg_.repair_interval) + 1 : cfg_.repair_interval;
    schedule_maintenance(node->id, engine_.now() + mphase, interval);
    schedule_repair(node->id, engine_.now() + rphase);
}

NodeId Scenario::random_live() {
    return live_ids_[rng_.below(live_ids_.size())];
}

void Scenario::fail_node(Node* node) {
    if (node == nullptr || !node->alive) return;
    node->fail();
    auto it = std::find(live_ids_.begin(), live_ids_.end(), node->id);
    if (it != live_ids_.end()) {
        *it = live_ids_.back();
        live_ids_.pop_back();
    }
}

void Scenario::schedule_node_death(NodeId id) {
    Time life = static_cast<Time>(std::max(1.0, rng_.exponential(double(cfg_.mean_lifetime))));
    engine_.after(life, EventTag::node_fail, [this, id]() {
        if (!churn_active_ || engine_.now() > window_end_) return;
        Node* node = net_.find(id);
        if (node == nullptr || !node->alive) return;
        fail_node(node);
        engine_.after(cfg_.replacement_delay, EventTag::node_join,
                      [this]() { replace_node(); });
    });
}

Task Scenario::replace_node() {
    if (!churn_active_ || engine_.now() > window_end_) co_return;
    if (live_ids_.empty()) co_return;
    Node* node = spawn_node(fresh_id());
    schedule_node_death(node->id);
    for (unsigned attempt = 0; attempt < 5; ++attempt) {
        NodeId via = random_live();
        if (via == node->id) continue;
        auto aw1_ = node->bootstrap(via);
        bool ok = co_await std::move(aw1_);
        if (ok) {
            start_timers(node, true);
            co_return;
        }
        if (!node->alive) co_return;
        co_await Delay{engine_, 10};
    }
    // could not join; the node stays isolated and counts as failed
    fail_node(node);
}

void Scenario::schedule_steady_churn() {
    churn_active_ = true;
    if (cfg_.per_network_churn) {
        // one failure per day system-wide
        std::function<void()> tick = [this]() {
            Time gap = static_cast<Time>(std::max(1.0, rng_.exponential(86400.0)));
            engine_.after(gap, EventTag::node_fail, [this]() {
                if (!churn_active_ || engine_.now() > window_end_) return;
                Node* node = net_.find(random_live());
                fail_node(node);
                engine_.after(cfg_.replacement_delay, EventTag::node_join,
                              [this]() { replace_node(); });
                schedule_steady_churn();
            });
        };
        tick();
        return;
    }
    for (auto& node : nodes_)
        if (node->alive) schedule_node_death(node->id);
}

Task Scenario::fetch_task(Key key) {
    Node* origin = net_.find(random_live());
    if (origin == nullptr || !origin->alive) {
        ++metrics_.cancelled_fetches;
        ++fetches_done_;
        finish_if_done();
        co_return;
    }
    auto aw2_ = origin->storage->fetch(key);
    FetchResult res = co_await std::move(aw2_);
    switch (res.status) {
        case FetchResult::Status::found:
            metrics_.fetch_latency.push_back(res.elapsed);
            metrics_.fetch_probes.push_back(res.probes);
            break;
        case FetchResult::Status::extinct:
            ++metrics_.extinct_fetches;
            break;
        case FetchResult::Status::cancelled:
            ++metrics_.cancelled_fetches;
            break;
        case FetchResult::Status::not_found:
            ++metrics_.fetch_failures;
            break;
    }
    ++fetches_done_;
    finish_if_done();
}

void Scenario::schedule_workload() {
    const bool burst = cfg_.churn == ChurnMode::catastrophe;
    for (std::uint64_t i = 0; i < cfg_.fetch_count; ++i) {
        Time at = burst ? engine_.now() : engine_.now() + rng_.below(cfg_.half_life);
        Key key = keys_[rng_.below(keys_.size())];
        engine_.at(at, EventTag::fetch_launch, [this, key]() { fetch_task(key); });
    }
}

void Scenario::finish_if_done() {
    if (fetches_done_ < cfg_.fetch_count) return;
    if (cfg_.churn == ChurnMode::catastrophe || engine_.now() >= window_end_) engine_.stop();
}

void Scenario::final_scan() {
    for (Key key : keys_)
        if (net_.key_extinct(key)) ++metrics_.loss_events;
}

MetricsLog Scenario::run() {
    build_ring();
    load_items();
    if (!warmup()) throw std::runtime_error("warm-up did not converge");

    // metrics window starts after warm-up
    net_.attach_metrics(&metrics_);
    const Time start = engine_.now();
    window_end_ = start + (cfg_.churn == ChurnMode::catastrophe
                               ? std::numeric_limits<Time>::max() - start - 1
                               : cfg_.half_life);

    for (auto& node : nodes_)
        if (node->alive) start_timers(node.get(), true);

    if (cfg_.churn == ChurnMode::steady) schedule_steady_churn();
    if (cfg_.churn == ChurnMode::catastrophe) {
        std::uint64_t to_fail = static_cast<std::uint64_t>(cfg_.catastrophe_fraction *
                                                           static_cast<double>(cfg_.nodes));
        for (std::uint64_t i = 0; i < to_fail && live_ids_.size() > 1; ++i)
            fail_node(net_.find(random_live()));
    }
    schedule_workload();
    if (cfg_.churn != ChurnMode::catastrophe)
        engine_.at(window_end_, EventTag::other, [this]() { finish_if_done(); });

    engine_.run();

    final_scan();
    metrics_.fetches_launched = cfg_.fetch_count;
    metrics_.trace_hash = engine_.trace_hash();
    metrics_.events = engine_.dispatched();
    return metrics_;
}

}  // namespace

MetricsLog run_single(const ScenarioConfig& cfg, std::uint64_t seed) {
    auto errs = cfg.validate();
    if (!errs.empty()) throw std::invalid_argument("scenario config: " + errs.front());
    Scenario s(cfg, seed);
    return s.run();
}

std::vector<MetricsLog> run_scenario(const ScenarioConfig& cfg) {
    std::vector<MetricsLog> out;
    out.reserve(cfg.repeats);
    for (unsigned i = 0; i < cfg.repeats; ++i) out.push_back(run_single(cfg, cfg.seed + i));
    return out;
}

}  // namespace dhtsim::sim
