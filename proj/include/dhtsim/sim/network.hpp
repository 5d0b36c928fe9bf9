#pragma once

#include <coroutine>
#include <cstdint>
#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

#include "dhtsim/ring.hpp"
#include "dhtsim/rng.hpp"
#include "dhtsim/sim/engine.hpp"
#include "dhtsim/sim/metrics.hpp"
#include "dhtsim/sim/wire.hpp"

namespace dhtsim::sim {

class Node;

struct TimeoutPolicy {
    Time rtt_hops = 3;
    Time recursive_hops = 15;
};

// rtt fixed at 3 hops; recursive timeout scales with network size,
// round(2 * log2 N) hops (15 in a 200 node network).
TimeoutPolicy timeout_policy(std::uint64_t n);

// Message transport, node registry and bandwidth accounting for one run.
// Single-threaded; all delivery is via engine events, one tick per hop.
class Network {
public:
    Network(Engine& engine, RingSpace ring, Rng& rng, TimeoutPolicy timeouts)
        : engine_(engine), ring_(ring), rng_(rng), timeouts_(timeouts) {}

    Engine& engine() { return engine_; }
    const RingSpace& ring() const { return ring_; }
    Rng& rng() { return rng_; }
    const TimeoutPolicy& timeouts() const { return timeouts_; }

    // -- registry --------------------------------------------------------
    void register_node(Node& node);
    void mark_failed(Node& node);
    Node* find(NodeId id) const;
    const std::map<NodeId, Node*>& live() const { return live_; }
    std::size_t live_count() const { return live_.size(); }

    // Global-knowledge helpers (simulator oracle; also used by tests).
    NodeId oracle_owner(std::uint64_t key) const;
    bool key_extinct(Key key) const;

    // -- accounting ------------------------------------------------------
    void attach_metrics(MetricsLog* m) { metrics_ = m; }
    void set_counting(bool on) { counting_ = on; }
    void count(Category cat, std::uint64_t bytes);

    // -- request/response ------------------------------------------------
    class RpcAwait;
    RpcAwait call(Node& self, NodeId dst, MsgKind kind, Category cat, std::uint64_t bytes,
                  Payload req);
    void send_oneway(Node& self, NodeId dst, MsgKind kind, Category cat, std::uint64_t bytes,
                     Payload msg);

    // -- recursive routing -----------------------------------------------
    std::uint64_t new_req_id() { return ++req_id_; }
    void start_recursive(Node& origin, RecMsg msg);
    void forward_recursive(Node& from, NodeId next, RecMsg msg);
    void reply_to_origin(Node& from, const RecMsg& req, RecReply reply, std::uint64_t bytes,
                         Category cat);

    class ReplyAwait;
    ReplyAwait await_reply(Node& self, std::uint64_t req_id, Time timeout);

private:
    struct PendingRec {
        std::coroutine_handle<> handle;
        std::shared_ptr<RecReply> slot;
        NodeId owner = 0;
    };

    void deliver_reply(std::uint64_t req_id, RecReply&& reply);
    void timeout_reply(std::uint64_t req_id);

    Engine& engine_;
    RingSpace ring_;
    Rng& rng_;
    TimeoutPolicy timeouts_;
    MetricsLog* metrics_ = nullptr;
    bool counting_ = true;

    std::map<NodeId, Node*> all_;   // tombstones included
    std::map<NodeId, Node*> live_;
    std::unordered_map<std::uint64_t, PendingRec> pending_;
    std::uint64_t req_id_ = 0;

    friend class RpcAwait;
    friend class ReplyAwait;
};

// All in-flight call state lives on the heap and is guarded by a done flag,
// so a pending delivery event never touches a finished awaiter's frame.
class Network::RpcAwait {
public:
    struct State {
        Network* net = nullptr;
        NodeId initiator = 0;
        NodeId dst = 0;
        MsgKind kind{};
        Category cat{};
        Payload req;
        RpcResult result;
        std::coroutine_handle<> waiter;
        bool done = false;
    };

    RpcAwait(Network& net, Node& self, NodeId dst, MsgKind kind, Category cat, std::uint64_t bytes,
             Payload req);

    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h);
    RpcResult await_resume() { return std::move(state_->result); }

private:
    static void finish(const std::shared_ptr<State>& st, RpcResult::Status status);

    std::uint64_t bytes_;
    std::shared_ptr<State> state_;
};

class Network::ReplyAwait {
public:
    ReplyAwait(Network& net, Node& self, std::uint64_t req_id, Time timeout)
        : net_(net), self_(self), req_id_(req_id), timeout_(timeout) {}

    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h);
    RecReply await_resume() { return std::move(*slot_); }

private:
    Network& net_;
    Node& self_;
    std::uint64_t req_id_;
    Time timeout_;
    std::shared_ptr<RecReply> slot_ = std::make_shared<RecReply>();
};

}  // namespace dhtsim::sim
