#pragma once

#include "dhtsim/allocation.hpp"
#include "dhtsim/sim/node.hpp"
#include "dhtsim/sim/storage.hpp"

namespace dhtsim::sim {

struct DynamicParams {
    AllocationConfig alloc;
    bool core_first = true;        // search core indices before peripheral ones
    bool remove_single = false;    // prune just the missed index, not the range above it
    unsigned stop_after_empty = 2; // fast-mode update stop rule
    unsigned fetch_retry_cap = 8;  // 0 = unlimited
    unsigned bloom_bits_per_item = 10;
    unsigned bloom_hashes = 7;
    unsigned overload_threshold = 0;  // preemptive answers per tick; 0 = unlimited
    Time sync_settle = 8;
};

// Replica enumeration over h(m, d): core/peripheral/global maintenance with
// allocation-collision overflow, Algorithm-2 fetch and recursive gets with
// preemptive returns.
class DynamicStorage : public Storage {
public:
    DynamicStorage(Node& node, DynamicParams params)
        : Storage(node), params_(std::move(params)) {
        name_ = std::string("dyn-") + dhtsim::to_string(params_.alloc.kind);
    }

    const char* name() const override { return name_.c_str(); }
    Task maintenance_round() override;
    Op<FetchResult> fetch(Key key) override;
    Op<bool> put(const DataItem& item) override;
    RpcReply handle_rpc(NodeId src, const Payload& payload) override;
    void handle_oneway(NodeId src, Payload&& payload) override;
    bool can_preempt(Key key) const override;

    // Offers a new version to every replica-location owner; strict mode
    // visits all of them, fast mode stops after consecutive empty
    // peripheral locations.  Returns the number of replicas updated.
    Op<unsigned> update(const DataItem& item, bool strict);

    const DynamicParams& params() const { return params_; }
    const AllocationConfig& alloc() const { return params_.alloc; }

    // exposed for invariants and tests
    unsigned min_index_here(Key key) const;

private:
    struct SyncJob {
        NodeId holder = 0;
        unsigned index = 0;
        KeyRange docs;
        std::vector<KeyDigest> explicit_keys;  // per-item jobs (random kind)
    };

    Op<bool> plan_core_jobs();
    Op<bool> resolve_cover(KeyRange docs, unsigned index,
                           std::vector<std::pair<KeyRange, NodeId>>& out);
    Op<bool> plan_fragment(KeyRange docs, std::vector<NodeId> used, unsigned slot,
                           unsigned overflow_next, unsigned pending_overflow, unsigned depth);
    Op<bool> core_pass(SyncDirection direction);
    Op<bool> peripheral_pass();
    Op<bool> global_pass();
    Op<bool> plan_random_kind_jobs();

    DynamicParams params_;
    std::string name_;
    std::vector<SyncJob> jobs_;     // per-round plan, built by the gather pass
    Time preempt_tick_ = 0;         // overload accounting
    unsigned preempts_this_tick_ = 0;
};

}  // namespace dhtsim::sim
