#pragma once

#include "dhtsim/sim/node.hpp"
#include "dhtsim/sim/storage.hpp"

namespace dhtsim::sim {

struct DhashParams {
    unsigned replicas = 6;         // r: items live on the owner and its r successors
    unsigned fetch_retry_cap = 8;  // 0 = unlimited
    Time sync_settle = 8;          // ticks between the gather and distribute passes
};

// Successor replication: placement on the owner's r successors, two-pass
// local maintenance, per-key global maintenance, randomized replica fetch.
class DhashStorage : public Storage {
public:
    DhashStorage(Node& node, DhashParams params) : Storage(node), params_(params) {}

    const char* name() const override { return "dhash"; }
    Task maintenance_round() override;
    Op<FetchResult> fetch(Key key) override;
    Op<bool> put(const DataItem& item) override;
    RpcReply handle_rpc(NodeId src, const Payload& payload) override;
    void handle_oneway(NodeId src, Payload&& payload) override;

    const DhashParams& params() const { return params_; }

private:
    Op<bool> global_pass();
    void announce_local_sync(SyncDirection direction);

    DhashParams params_;
};

// Range synchronization choreography shared by the storage protocols: a
// checksummed one-way announcement, digests back on mismatch, then want
// lists and item transfers.  Matching receivers stay silent.
namespace syncproto {
void announce(Node& node, NodeId dst, const KeyRange& docs, unsigned index,
              SyncDirection direction);
void announce_per_item(Node& node, NodeId dst, std::vector<KeyDigest> digests);
bool handle(Node& node, ReplicaStore& store, NodeId src, const Payload& payload);
}  // namespace syncproto

}  // namespace dhtsim::sim
