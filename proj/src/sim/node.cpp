#include "dhtsim/sim/node.hpp"

#include <algorithm>
#include <cassert>

namespace dhtsim::sim {

Node::Node(Network& net, NodeId id_, NodeParams params) : id(id_), net_(net), params_(params) {
    fingers.assign(params_.finger_count, id_);
    net_.register_node(*this);
}

Node::~Node() = default;

KeyRange Node::owned_arc() const {
    if (!predecessor) return KeyRange{id, id};  // unknown; callers treat via owns()
    return KeyRange{*predecessor, id};
}

bool Node::owns(std::uint64_t key) const {
    if (!predecessor) return false;
    if (*predecessor == id) return true;  // lone node owns the full ring
    return range_contains(net_.ring(), KeyRange{*predecessor, id}, key);
}

std::uint64_t Node::finger_target(unsigned i) const {
    const RingSpace& ring = net_.ring();
    unsigned span = ring.bits() - std::min(ring.bits(), params_.finger_count) + i;
    return ring.add(id, std::uint64_t{1} << span);
}

NodeId Node::closest_preceding(std::uint64_t target) const {
    static const std::vector<NodeId> kNone;
    return closest_preceding(target, kNone);
}

NodeId Node::closest_preceding(std::uint64_t target, const std::vector<NodeId>& exclude) const {
    const RingSpace& ring = net_.ring();
    const std::uint64_t limit = ring.distance_cw(id, target);  // distance to target
    NodeId best = id;
    std::uint64_t best_dist = 0;
    auto consider = [&](NodeId cand) {
        if (cand == id || cand == target) return;
        if (std::find(exclude.begin(), exclude.end(), cand) != exclude.end()) return;
        std::uint64_t d = ring.distance_cw(id, cand);
        if (d >= limit) return;  // not strictly between self and target
        if (d > best_dist) {
            best = cand;
            best_dist = d;
        }
    };
    for (NodeId f : fingers) consider(f);
    for (NodeId s : successors) consider(s);
    return best;
}

void Node::prune_peer(NodeId dead) {
    successors.erase(std::remove(successors.begin(), successors.end(), dead), successors.end());
    for (auto& f : fingers)
        if (f == dead) f = successors.empty() ? id : successors.front();
    if (predecessor && *predecessor == dead) predecessor.reset();
}

void Node::adopt_successor(NodeId succ) {
    if (succ == id) return;
    if (std::find(successors.begin(), successors.end(), succ) == successors.end())
        successors.push_back(succ);
    const RingSpace& ring = net_.ring();
    std::sort(successors.begin(), successors.end(), [&](NodeId a, NodeId b) {
        return ring.distance_cw(id, a) < ring.distance_cw(id, b);
    });
    if (successors.size() > params_.successor_list_len)
        successors.resize(params_.successor_list_len);
}

void Node::set_successor_chain(NodeId first, const std::vector<NodeId>& rest) {
    successors.clear();
    if (first != id) successors.push_back(first);
    for (NodeId s : rest) {
        if (s == id || s == first) continue;
        if (std::find(successors.begin(), successors.end(), s) != successors.end()) continue;
        successors.push_back(s);
        if (successors.size() >= params_.successor_list_len) break;
    }
    const RingSpace& ring = net_.ring();
    std::sort(successors.begin(), successors.end(), [&](NodeId a, NodeId b) {
        return ring.distance_cw(id, a) < ring.distance_cw(id, b);
    });
}

StateResp Node::state_snapshot() const {
    StateResp resp;
    resp.has_pred = predecessor.has_value();
    resp.pred = predecessor.value_or(0);
    resp.succs = successors;
    return resp;
}

// ---------------------------------------------------------------------------
// message entry points

RpcReply Node::handle_rpc(NodeId src, MsgKind kind, const Payload& payload) {
    (void)kind;
    if (std::holds_alternative<StateReq>(payload) || std::holds_alternative<LookupStepReq>(payload))
        return ring_rpc(src, payload);
    assert(storage != nullptr);
    return storage->handle_rpc(src, payload);
}

RpcReply Node::ring_rpc(NodeId, const Payload& payload) {
    const RingSpace& ring = net_.ring();
    RpcReply rep;
    if (const auto* sr = std::get_if<StateReq>(&payload)) {
        (void)sr;
        StateResp resp = state_snapshot();
        rep.bytes = wire::refs(resp.succs.size() + 1);
        rep.payload = std::move(resp);
        return rep;
    }
    const auto& req = std::get<LookupStepReq>(payload);
    LookupStepResp resp;
    auto excluded = [&](NodeId n) {
        return std::find(req.exclude.begin(), req.exclude.end(), n) != req.exclude.end();
    };
    NodeId first_succ = 0;
    for (NodeId s : successors) {
        if (excluded(s)) continue;
        first_succ = s;
        break;
    }
    if (first_succ != 0 && range_contains(ring, KeyRange{id, first_succ}, req.target)) {
        resp.final = true;
        resp.node = first_succ;
    } else {
        NodeId next = closest_preceding(req.target, req.exclude);
        if (next == id) {
            resp.final = true;
            resp.node = first_succ;  // 0 when no viable candidate
        } else {
            resp.node = next;
        }
    }
    rep.bytes = wire::refs(1);
    rep.payload = resp;
    return rep;
}

void Node::handle_oneway(NodeId src, MsgKind kind, Payload&& payload) {
    (void)kind;
    if (auto* notify = std::get_if<NotifyMsg>(&payload)) {
        NodeId cand = notify->candidate;
        if (cand == id) return;
        const RingSpace& ring = net_.ring();
        if (!predecessor || *predecessor == id ||
            ring.distance_cw(*predecessor, cand) < ring.distance_cw(*predecessor, id))
            predecessor = cand;
        return;
    }
    assert(storage != nullptr);
    storage->handle_oneway(src, std::move(payload));
}

void Node::handle_recursive(RecMsg msg, bool local) {
    if (!alive) return;
    if (msg.hops > msg.budget) return;  // loop guard; origin times out
    const RingSpace& ring = net_.ring();

    // A routed node holding any addressable replica may answer early.
    if (msg.op == RecOp::dynamic_get && storage && storage->can_preempt(msg.key)) {
        if (auto item = storage->item_for_final(msg.key)) {
            RecReply reply;
            reply.outcome = RecOutcomeKind::item;
            reply.item = *item;
            net_.reply_to_origin(*this, msg, std::move(reply),
                                 wire::kHeader + wire::kDigest + item->size, Category::fetch);
            return;
        }
    }

    if (msg.final || owns(msg.location)) {
        RecReply reply;
        if (msg.op == RecOp::dhash_find_succs) {
            reply.outcome = RecOutcomeKind::succ_list;
            reply.list.push_back(id);
            for (NodeId s : successors) reply.list.push_back(s);
            net_.reply_to_origin(*this, msg, std::move(reply), wire::refs(reply.list.size()),
                                 Category::fetch);
        } else if (auto item = storage ? storage->item_for_final(msg.key) : std::nullopt) {
            reply.outcome = RecOutcomeKind::item;
            reply.item = *item;
            net_.reply_to_origin(*this, msg, std::move(reply),
                                 wire::kHeader + wire::kDigest + item->size, Category::fetch);
        } else {
            reply.outcome = RecOutcomeKind::miss;
            net_.reply_to_origin(*this, msg, std::move(reply), wire::kHeader, Category::fetch);
        }
        return;
    }

    (void)local;
    auto tried = [&](NodeId n) {
        return std::find(msg.tried.begin(), msg.tried.end(), n) != msg.tried.end();
    };
    NodeId first_succ = 0;
    for (NodeId s : successors) {
        if (tried(s)) continue;
        first_succ = s;
        break;
    }
    if (first_succ != 0 && range_contains(ring, KeyRange{id, first_succ}, msg.location)) {
        msg.final = true;  // recipient answers for the location even mid-handoff
        net_.forward_recursive(*this, first_succ, std::move(msg));
        return;
    }
    NodeId next = closest_preceding(msg.location, msg.tried);
    if (next == id) {
        if (first_succ == 0) return;  // dead end; origin times out
        msg.final = false;
        net_.forward_recursive(*this, first_succ, std::move(msg));
        return;
    }
    net_.forward_recursive(*this, next, std::move(msg));
}

void Node::on_forward_failed(NodeId dead, RecMsg msg) {
    if (!alive) return;
    prune_peer(dead);
    msg.tried.push_back(dead);
    msg.final = false;
    handle_recursive(std::move(msg), true);
}

// ---------------------------------------------------------------------------
// iterative lookup

Op<LookupResult> Node::lookup(std::uint64_t target, Category category, bool want_state) {
    LookupResult out;
    const RingSpace& ring = net_.ring();

    for (unsigned restart = 0; restart < 3; ++restart) {
        if (owns(target)) {
            out.status = LookupResult::Status::ok;
            out.owner = id;
            out.has_pred = predecessor.has_value();
            out.owner_pred = predecessor.value_or(0);
            out.succs = successors;
            co_return out;
        }
        std::vector<NodeId> exclude;
        std::vector<NodeId> path{id};
        NodeId owner = 0;
        NodeId ask = 0;
        bool final = false;

        auto local_step = [&]() {
            final = false;
            ask = 0;
            owner = 0;
            NodeId first_succ = 0;
            for (NodeId s : successors) {
                if (std::find(exclude.begin(), exclude.end(), s) != exclude.end()) continue;
                first_succ = s;
                break;
            }
            if (first_succ != 0 && range_contains(ring, KeyRange{id, first_succ}, target)) {
                final = true;
                owner = first_succ;
                return;
            }
            NodeId next = closest_preceding(target, exclude);
            if (next == id) {  // nothing between us and the target
                final = true;
                owner = first_succ;
                return;
            }
            ask = next;
        };

        local_step();
        while (!final && out.steps < params_.lookup_step_cap) {
            if (ask == 0) break;
            ++out.steps;
            auto aw1_ = net_.call(*this, ask, MsgKind::lookup, category,
                                        wire::refs(exclude.size()), LookupStepReq{target, exclude});
            auto r = co_await std::move(aw1_);
            if (r.cancelled()) {
                out.status = LookupResult::Status::cancelled;
                co_return out;
            }
            if (!r.ok()) {
                exclude.push_back(ask);
                prune_peer(ask);
                // back up one hop and re-ask with the exclusion
                if (path.size() > 1) {
                    ask = path.back();
                    path.pop_back();
                } else {
                    local_step();
                }
                continue;
            }
            const auto& resp = r.as<LookupStepResp>();
            if (resp.node == 0) break;  // dead end at remote
            if (resp.final) {
                final = true;
                owner = resp.node;
            } else {
                path.push_back(ask);
                ask = resp.node;
            }
        }
        if (!final || owner == 0) break;  // dead end or step cap

        {
            if (!want_state) {
                out.status = LookupResult::Status::ok;
                out.owner = owner;
                co_return out;
            }
            if (owner == id) {
                out.status = LookupResult::Status::ok;
                out.owner = id;
                out.has_pred = predecessor.has_value();
                out.owner_pred = predecessor.value_or(0);
                out.succs = successors;
                co_return out;
            }
            ++out.steps;
            auto aw2_ = net_.call(*this, owner, MsgKind::lookup, category, wire::kHeader,
                                        StateReq{});
            auto r = co_await std::move(aw2_);
            if (r.cancelled()) {
                out.status = LookupResult::Status::cancelled;
                co_return out;
            }
            if (!r.ok()) continue;  // owner died under us; restart
            const auto& st = r.as<StateResp>();
            out.status = LookupResult::Status::ok;
            out.owner = owner;
            out.has_pred = st.has_pred;
            out.owner_pred = st.pred;
            out.succs = st.succs;
            co_return out;
        }
    }
    out.status =
        alive ? LookupResult::Status::timeout : LookupResult::Status::cancelled;
    co_return out;
}

// ---------------------------------------------------------------------------
// repair and membership

Task Node::stabilize() {
    if (!alive) co_return;
    const RingSpace& ring = net_.ring();

    unsigned attempts = params_.successor_list_len + 1;
    while (attempts-- > 0 && alive) {
        if (successors.empty()) break;  // lone node
        NodeId s = successors.front();
        auto aw3_ = net_.call(*this, s, MsgKind::chord_repair, Category::chord_repair,
                                    wire::kHeader, StateReq{});
        auto r = co_await std::move(aw3_);
        if (r.cancelled()) co_return;
        if (!r.ok()) {
            prune_peer(s);  // advance to the next live successor
            continue;
        }
        const auto& st = r.as<StateResp>();
        NodeId adopted = s;
        std::vector<NodeId> chain = st.succs;
        if (st.has_pred && st.pred != id && st.pred != s &&
            ring.distance_cw(id, st.pred) < ring.distance_cw(id, s)) {
            // someone joined between us and our successor; verify before adopting
            auto aw4_ = net_.call(*this, st.pred, MsgKind::chord_repair,
                                        Category::chord_repair, wire::kHeader, StateReq{});
            auto v = co_await std::move(aw4_);
            if (v.cancelled()) co_return;
            if (v.ok()) {
                adopted = st.pred;
                chain = v.as<StateResp>().succs;
                chain.insert(chain.begin(), s);
            }
        }
        set_successor_chain(adopted, chain);
        net_.send_oneway(*this, adopted, MsgKind::chord_repair, Category::chord_repair,
                         wire::kHeader, NotifyMsg{id});
        break;
    }

    if (!alive) co_return;
    if (predecessor && *predecessor != id) {
        NodeId p = *predecessor;
        auto aw5_ = net_.call(*this, p, MsgKind::chord_repair, Category::chord_repair,
                                    wire::kHeader, StateReq{});
        auto r = co_await std::move(aw5_);
        if (r.cancelled()) co_return;
        if (!r.ok() && predecessor && *predecessor == p) predecessor.reset();
    }

    for (unsigned k = 0; k < params_.fingers_per_repair && alive; ++k) {
        unsigned i = next_finger_;
        next_finger_ = (next_finger_ + 1) % params_.finger_count;
        auto aw6_ = lookup(finger_target(i), Category::chord_repair, false);
        auto lr = co_await std::move(aw6_);
        if (lr.status == LookupResult::Status::cancelled) co_return;
        if (lr.ok() && lr.owner != 0) fingers[i] = lr.owner;
    }
}

Op<bool> Node::bootstrap(NodeId via) {
    const RingSpace& ring = net_.ring();
    (void)ring;
    // Route the join lookup through the bootstrap node.
    std::uint64_t target = id;
    std::vector<NodeId> exclude;
    NodeId ask = via;
    NodeId owner = 0;
    unsigned steps = 0;
    while (steps < params_.lookup_step_cap) {
        ++steps;
        auto aw7_ = net_.call(*this, ask, MsgKind::chord_repair, Category::chord_repair,
                                    wire::refs(exclude.size()), LookupStepReq{target, exclude});
        auto r = co_await std::move(aw7_);
        if (r.cancelled()) co_return false;
        if (!r.ok()) co_return false;
        const auto& resp = r.as<LookupStepResp>();
        if (resp.node == 0) co_return false;
        if (resp.final) {
            owner = resp.node;
            break;
        }
        ask = resp.node;
    }
    if (owner == 0 || owner == id) co_return false;

    auto aw8_ = net_.call(*this, owner, MsgKind::chord_repair, Category::chord_repair,
                                 wire::kHeader, StateReq{});
    auto st = co_await std::move(aw8_);
    if (!st.ok()) co_return false;
    const auto& state = st.as<StateResp>();
    set_successor_chain(owner, state.succs);
    // Inherit the arc boundary immediately; the owner learns of us via notify.
    if (state.has_pred && state.pred != id)
        predecessor = state.pred;
    net_.send_oneway(*this, owner, MsgKind::chord_repair, Category::chord_repair, wire::kHeader,
                     NotifyMsg{id});
    std::fill(fingers.begin(), fingers.end(), owner);
    // Seed fingers with real lookups right away.
    for (unsigned i = 0; i < params_.finger_count && alive; ++i) {
        auto aw9_ = lookup(finger_target(i), Category::chord_repair, false);
        auto lr = co_await std::move(aw9_);
        if (lr.status == LookupResult::Status::cancelled) co_return false;
        if (lr.ok() && lr.owner != 0) fingers[i] = lr.owner;
    }
    co_return alive;
}

Task Node::join_via(NodeId bootstrap_node, Task*) {
    auto aw10_ = bootstrap(bootstrap_node);
    bool ok = co_await std::move(aw10_);
    (void)ok;
}

void Node::fail() {
    if (!alive) return;
    alive = false;
    net_.mark_failed(*this);
    if (storage) storage->store().clear();
}

std::optional<DataItem> Storage::item_for_final(Key key) const {
    const StoredItem* s = store_.find(key);
    if (s == nullptr || s->orphaned) return std::nullopt;
    return s->item;
}

}  // namespace dhtsim::sim
