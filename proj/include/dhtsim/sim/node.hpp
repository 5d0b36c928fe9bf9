#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "dhtsim/ring.hpp"
#include "dhtsim/sim/engine.hpp"
#include "dhtsim/sim/network.hpp"
#include "dhtsim/sim/storage.hpp"
#include "dhtsim/sim/wire.hpp"

namespace dhtsim::sim {

struct NodeParams {
    unsigned successor_list_len = 10;
    unsigned finger_count = 12;
    unsigned fingers_per_repair = 1;
    unsigned lookup_step_cap = 48;
};

struct LookupResult {
    enum class Status : std::uint8_t { ok, timeout, cancelled } status = Status::timeout;
    NodeId owner = 0;
    bool has_pred = false;
    NodeId owner_pred = 0;
    std::vector<NodeId> succs;  // owner's successor list (when requested)
    unsigned steps = 0;

    bool ok() const { return status == Status::ok; }
};

// One Chord node: routing state plus the plugged storage protocol.
class Node {
public:
    Node(Network& net, NodeId id, NodeParams params);
    ~Node();

    Network& net() { return net_; }
    const NodeParams& params() const { return params_; }

    NodeId id = 0;
    bool alive = true;
    std::optional<NodeId> predecessor;
    std::vector<NodeId> successors;  // ordered by clockwise distance, no dups
    std::vector<NodeId> fingers;     // finger i tracks id + 2^(bits - fc + i)

    std::unique_ptr<Storage> storage;

    // -- ring geometry -----------------------------------------------------
    KeyRange owned_arc() const;          // (predecessor, id]; unknown pred -> (id, id] treated empty
    bool owns(std::uint64_t key) const;  // pred known and key in owned arc
    std::uint64_t finger_target(unsigned i) const;

    // Best known node strictly preceding target, from fingers and successors.
    NodeId closest_preceding(std::uint64_t target) const;
    NodeId closest_preceding(std::uint64_t target, const std::vector<NodeId>& exclude) const;

    // -- table maintenance ---------------------------------------------------
    void prune_peer(NodeId dead);       // drop a dead reference everywhere
    void adopt_successor(NodeId succ);  // insert, keep sorted/unique/bounded
    void set_successor_chain(NodeId first, const std::vector<NodeId>& rest);

    // -- protocols ----------------------------------------------------------
    Task stabilize();                                 // one repair round
    Task join_via(NodeId bootstrap, Task* done = nullptr);
    Op<bool> bootstrap(NodeId via);                   // join handshake; false on timeout
    Op<LookupResult> lookup(std::uint64_t target, Category category, bool want_state);
    void fail();

    // -- message entry points ------------------------------------------------
    RpcReply handle_rpc(NodeId src, MsgKind kind, const Payload& payload);
    void handle_oneway(NodeId src, MsgKind kind, Payload&& payload);
    void handle_recursive(RecMsg msg, bool local);
    void on_forward_failed(NodeId dead, RecMsg msg);

private:
    RpcReply ring_rpc(NodeId src, const Payload& payload);
    StateResp state_snapshot() const;

    Network& net_;
    NodeParams params_;
    unsigned next_finger_ = 0;
};

}  // namespace dhtsim::sim
