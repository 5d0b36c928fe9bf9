#include "dhtsim/sim/network.hpp"
#include <cstdio>
#include <cstdlib>

#include <cassert>
#include <cmath>

#include "dhtsim/sim/node.hpp"

namespace dhtsim::sim {

const char* to_string(Category c) {
    switch (c) {
        case Category::maintenance_overhead: return "maintenance-overhead";
        case Category::data_movement: return "data-movement";
        case Category::chord_repair: return "chord-repair";
        case Category::fetch: return "fetch";
    }
    return "?";
}

TimeoutPolicy timeout_policy(std::uint64_t n) {
    assert(n >= 2);
    TimeoutPolicy p;
    p.rtt_hops = 3;
    p.recursive_hops =
        static_cast<Time>(std::llround(2.0 * std::log2(static_cast<double>(n))));
    return p;
}

void Network::register_node(Node& node) {
    assert(all_.find(node.id) == all_.end());
    all_[node.id] = &node;
    live_[node.id] = &node;
}

void Network::mark_failed(Node& node) {
    live_.erase(node.id);
}

Node* Network::find(NodeId id) const {
    auto it = all_.find(id);
    return it == all_.end() ? nullptr : it->second;
}

NodeId Network::oracle_owner(std::uint64_t key) const {
    assert(!live_.empty());
    auto it = live_.lower_bound(key);
    if (it == live_.end()) it = live_.begin();
    return it->first;
}

bool Network::key_extinct(Key key) const {
    for (const auto& [id, node] : live_) {
        const StoredItem* s = node->storage ? node->storage->store().find(key) : nullptr;
        if (s) return false;
    }
    return true;
}

void Network::count(Category cat, std::uint64_t bytes) {
    if (!counting_ || metrics_ == nullptr) return;
    metrics_->bytes_by_category[static_cast<std::size_t>(cat)] += bytes;
    metrics_->msgs_by_category[static_cast<std::size_t>(cat)] += 1;
}

Network::RpcAwait Network::call(Node& self, NodeId dst, MsgKind kind, Category cat,
                                std::uint64_t bytes, Payload req) {
    return RpcAwait(*this, self, dst, kind, cat, bytes, std::move(req));
}

Network::RpcAwait::RpcAwait(Network& net, Node& self, NodeId dst, MsgKind kind, Category cat,
                            std::uint64_t bytes, Payload req)
    : bytes_(bytes), state_(std::make_shared<State>()) {
    state_->net = &net;
    state_->initiator = self.id;
    state_->dst = dst;
    state_->kind = kind;
    state_->cat = cat;
    state_->req = std::move(req);
}

void Network::RpcAwait::finish(const std::shared_ptr<State>& st, RpcResult::Status status) {
    if (st->done) return;
    st->done = true;
    Node* initiator = st->net->find(st->initiator);
    st->result.status = (initiator != nullptr && initiator->alive)
                            ? status
                            : RpcResult::Status::cancelled;
    st->waiter.resume();
}

void Network::RpcAwait::await_suspend(std::coroutine_handle<> h) {
    auto st = state_;
    assert(st->dst != st->initiator);
    st->waiter = h;
    Network& net = *st->net;
    net.count(st->cat, bytes_);
    net.engine_.after(1, EventTag::message_delivery, [st]() {
        Network& net = *st->net;
        Node* d = net.find(st->dst);
        if (d == nullptr || !d->alive) {
            Time rest = net.timeouts_.rtt_hops > 1 ? net.timeouts_.rtt_hops - 1 : 1;
            net.engine_.after(rest, EventTag::message_delivery,
                              [st]() { finish(st, RpcResult::Status::timeout); });
            return;
        }
        RpcReply rep = d->handle_rpc(st->initiator, st->kind, st->req);
        net.count(rep.has_category ? rep.category : st->cat, rep.bytes);
        st->result.payload = std::move(rep.payload);
        net.engine_.after(1, EventTag::message_delivery,
                          [st]() { finish(st, RpcResult::Status::ok); });
    });
}

void Network::send_oneway(Node& self, NodeId dst, MsgKind kind, Category cat, std::uint64_t bytes,
                          Payload msg) {
    assert(dst != self.id);
    count(cat, bytes);
    NodeId src = self.id;
    auto shared = std::make_shared<Payload>(std::move(msg));
    engine_.after(1, EventTag::message_delivery, [this, src, dst, kind, shared]() {
        Node* d = find(dst);
        if (d == nullptr || !d->alive) return;
        d->handle_oneway(src, kind, std::move(*shared));
    });
}

void Network::start_recursive(Node& origin, RecMsg msg) {
    origin.handle_recursive(std::move(msg), true);
}

void Network::forward_recursive(Node& from, NodeId next, RecMsg msg) {
    assert(next != from.id);
    count(Category::fetch, wire::kHeader + wire::kDigest);
    msg.hops += 1;
    NodeId from_id = from.id;
    auto shared = std::make_shared<RecMsg>(std::move(msg));
    engine_.after(1, EventTag::message_delivery, [this, from_id, next, shared]() {
        Node* d = find(next);
        if (d != nullptr && d->alive) {
            d->handle_recursive(std::move(*shared), false);
            return;
        }
        // Sender notices the dead hop after the round-trip timeout and
        // re-routes around it.
        Time rest = timeouts_.rtt_hops > 1 ? timeouts_.rtt_hops - 1 : 1;
        engine_.after(rest, EventTag::message_delivery, [this, from_id, next, shared]() {
            Node* f = find(from_id);
            if (f == nullptr || !f->alive) return;
            f->on_forward_failed(next, std::move(*shared));
        });
    });
}

void Network::reply_to_origin(Node& from, const RecMsg& req, RecReply reply, std::uint64_t bytes,
                              Category cat) {
    reply.req_id = req.req_id;
    if (req.origin == from.id) {
        // Answered locally: no message, no hop.  Delivery still goes through
        // the queue so the origin's await is registered first.
        reply.hops = req.hops;
        auto shared = std::make_shared<RecReply>(std::move(reply));
        engine_.after(0, EventTag::other, [this, shared]() {
            deliver_reply(shared->req_id, std::move(*shared));
        });
        return;
    }
    reply.hops = req.hops + 1;
    count(cat, bytes);
    auto shared = std::make_shared<RecReply>(std::move(reply));
    engine_.after(1, EventTag::message_delivery, [this, shared]() {
        deliver_reply(shared->req_id, std::move(*shared));
    });
}

void Network::deliver_reply(std::uint64_t req_id, RecReply&& reply) {
    auto it = pending_.find(req_id);
    if (it == pending_.end()) return;  // timed out or duplicate
    PendingRec pend = std::move(it->second);
    pending_.erase(it);
    Node* owner = find(pend.owner);
    if (owner == nullptr || !owner->alive) reply.outcome = RecOutcomeKind::cancelled;
    *pend.slot = std::move(reply);
    pend.handle.resume();
}

void Network::timeout_reply(std::uint64_t req_id) {
    auto it = pending_.find(req_id);
    if (it == pending_.end()) return;
    PendingRec pend = std::move(it->second);
    pending_.erase(it);
    RecReply r;
    r.req_id = req_id;
    Node* owner = find(pend.owner);
    r.outcome = (owner == nullptr || !owner->alive) ? RecOutcomeKind::cancelled
                                                    : RecOutcomeKind::timeout;
    *pend.slot = std::move(r);
    pend.handle.resume();
}

Network::ReplyAwait Network::await_reply(Node& self, std::uint64_t req_id, Time timeout) {
    return ReplyAwait(*this, self, req_id, timeout);
}

void Network::ReplyAwait::await_suspend(std::coroutine_handle<> h) {
    net_.pending_[req_id_] = PendingRec{h, slot_, self_.id};
    std::uint64_t id = req_id_;
    Network* net = &net_;
    net_.engine_.after(timeout_, EventTag::timer_fire, [net, id]() { net->timeout_reply(id); });
}

}  // namespace dhtsim::sim
