#include "dhtsim/sim/dhash.hpp"

#include <algorithm>

namespace dhtsim::sim {

// ---------------------------------------------------------------------------
// shared sync choreography

namespace syncproto {

void announce(Node& node, NodeId dst, const KeyRange& docs, unsigned index,
              SyncDirection direction) {
    if (dst == node.id) return;
    auto digest = node.storage->store().digest(node.net().ring(), docs);
    SyncReq req;
    req.docs = docs;
    req.index = index;
    req.direction = direction;
    req.count = digest.count;
    req.checksum = digest.checksum;
    node.net().send_oneway(node, dst, MsgKind::synchronize_summary, Category::maintenance_overhead,
                           wire::kHeader, std::move(req));
}

void announce_per_item(Node& node, NodeId dst, std::vector<KeyDigest> digests) {
    if (dst == node.id || digests.empty()) return;
    SyncReq req;
    req.per_item = true;
    req.direction = SyncDirection::distribute;
    req.explicit_keys = std::move(digests);
    std::uint64_t bytes = wire::digests(req.explicit_keys.size());
    node.net().send_oneway(node, dst, MsgKind::synchronize_summary, Category::maintenance_overhead,
                           bytes, std::move(req));
}

static void send_transfers(Node& node, NodeId dst, std::vector<DataItem> items) {
    if (items.empty() || dst == node.id) return;
    std::uint64_t bytes = wire::kHeader;
    for (const auto& it : items) bytes += wire::kDigest + it.size;
    TransferBatch batch;
    batch.items = std::move(items);
    node.net().send_oneway(node, dst, MsgKind::data_transfer, Category::data_movement, bytes,
                           std::move(batch));
}

bool handle(Node& node, ReplicaStore& store, NodeId src, const Payload& payload) {
    Network& net = node.net();
    const RingSpace& ring = net.ring();

    if (const auto* req = std::get_if<SyncReq>(&payload)) {
        if (req->per_item) {
            // push offer: reply with what we lack, sender transfers it
            SyncWant want;
            for (const auto& kd : req->explicit_keys) {
                const StoredItem* mine = store.find(kd.key);
                if (mine == nullptr || mine->item.version < kd.version) want.keys.push_back(kd.key);
            }
            if (!want.keys.empty())
                net.send_oneway(node, src, MsgKind::synchronize_summary,
                                Category::maintenance_overhead, wire::digests(want.keys.size()),
                                std::move(want));
            return true;
        }
        auto digest = store.digest(ring, req->docs);
        if (digest.count == req->count && digest.checksum == req->checksum)
            return true;  // in sync: stay silent
        SyncDigests resp;
        resp.docs = req->docs;
        resp.index = req->index;
        resp.direction = req->direction;
        resp.digests = store.key_digests(ring, req->docs);
        std::uint64_t bytes = wire::digests(resp.digests.size());
        net.send_oneway(node, src, MsgKind::synchronize_summary, Category::maintenance_overhead,
                        bytes, std::move(resp));
        return true;
    }

    if (const auto* dig = std::get_if<SyncDigests>(&payload)) {
        if (dig->direction == SyncDirection::gather) {
            // peer listed its replicas in my range; ask for what I lack
            SyncWant want;
            for (const auto& kd : dig->digests) {
                const StoredItem* mine = store.find(kd.key);
                if (mine == nullptr || mine->item.version < kd.version) want.keys.push_back(kd.key);
            }
            if (!want.keys.empty())
                net.send_oneway(node, src, MsgKind::synchronize_summary,
                                Category::maintenance_overhead, wire::digests(want.keys.size()),
                                std::move(want));
        } else {
            // distribute: peer told me its state; push what it lacks
            std::vector<DataItem> items;
            store.for_each_in(ring, dig->docs, [&](const StoredItem& s) {
                for (const auto& kd : dig->digests) {
                    if (kd.key != s.item.key) continue;
                    if (kd.version < s.item.version) items.push_back(s.item);
                    return;
                }
                items.push_back(s.item);
            });
            send_transfers(node, src, std::move(items));
        }
        return true;
    }

    if (const auto* want = std::get_if<SyncWant>(&payload)) {
        std::vector<DataItem> items;
        for (Key k : want->keys)
            if (const StoredItem* s = store.find(k)) items.push_back(s->item);
        send_transfers(node, src, std::move(items));
        return true;
    }

    if (const auto* batch = std::get_if<TransferBatch>(&payload)) {
        for (const auto& item : batch->items) store.upsert(item);
        return true;
    }

    return false;
}

}  // namespace syncproto

// ---------------------------------------------------------------------------

Task DhashStorage::maintenance_round() {
    if (!node_.alive) co_return;
    ++round_;
    auto aw1_ = global_pass();
    co_await std::move(aw1_);
    if (!node_.alive) co_return;
    // Local maintenance runs two passes: gather replicas of the owned range
    // onto the root, then redistribute them onto the successors.
    announce_local_sync(SyncDirection::gather);
    co_await Delay{node_.net().engine(), params_.sync_settle};
    if (!node_.alive) co_return;
    announce_local_sync(SyncDirection::distribute);
}

void DhashStorage::announce_local_sync(SyncDirection direction) {
    if (!node_.predecessor) return;
    KeyRange range = node_.owned_arc();
    unsigned fan = std::min<std::size_t>(params_.replicas, node_.successors.size());
    for (unsigned i = 0; i < fan; ++i)
        syncproto::announce(node_, node_.successors[i], range, 0, direction);
}

Op<bool> DhashStorage::global_pass() {
    Network& net = node_.net();
    const RingSpace& ring = net.ring();
    std::vector<Key> keys = store_.keys();
    if (keys.empty()) co_return true;
    // Walk clockwise from the far end of the stored span so one anchor
    // lookup primes the owner cache for the whole round.
    std::sort(keys.begin(), keys.end(), [&](Key a, Key b) {
        return ring.distance_cw(a, node_.id) < ring.distance_cw(b, node_.id);
    });
    std::reverse(keys.begin(), keys.end());

    for (Key key : keys) {
        if (!node_.alive) co_return false;
        if (node_.owns(key)) continue;
        auto aw2_ = resolve_owner(key, Category::maintenance_overhead);
        const OwnerCache::Entry* entry = co_await std::move(aw2_);
        if (entry == nullptr) continue;  // retained until next round
        if (!node_.alive) co_return false;
        bool duty = entry->owner == node_.id;
        unsigned r = params_.replicas;
        for (unsigned i = 0; i < entry->succs.size() && i < r && !duty; ++i)
            if (entry->succs[i] == node_.id) duty = true;
        if (duty) continue;

        const StoredItem* s = store_.find(key);
        if (s == nullptr) continue;
        NodeId owner = entry->owner;
        auto aw3_ = net.call(node_, owner, MsgKind::offer, Category::maintenance_overhead,
                                       wire::kHeader + wire::kDigest,
                                       OfferReq{key, s->item.version, false});
        auto offer = co_await std::move(aw3_);
        if (offer.cancelled()) co_return false;
        if (!offer.ok()) continue;  // offer timeout: keep the key this round
        auto verdict = offer.as<OfferResp>().verdict;
        if (verdict == OfferResp::Verdict::want) {
            s = store_.find(key);
            if (s == nullptr) continue;
            auto aw4_ = net.call(node_, owner, MsgKind::data_transfer,
                                        Category::data_movement,
                                        wire::kHeader + wire::kDigest + s->item.size,
                                        StoreReq{s->item});
            auto tx = co_await std::move(aw4_);
            if (tx.cancelled()) co_return false;
            if (!tx.ok()) continue;  // not acknowledged: keep the replica
        }
        store_.erase(key);
    }
    co_return true;
}

Op<FetchResult> DhashStorage::fetch(Key key) {
    Network& net = node_.net();
    Rng& rng = net.rng();
    FetchResult out;
    const Time t0 = net.engine().now();
    const std::uint32_t budget =
        static_cast<std::uint32_t>(4 * net.timeouts().recursive_hops + 16);
    unsigned tries = 0;

    while (true) {
        if (!node_.alive) {
            out.status = FetchResult::Status::cancelled;
            break;
        }
        ++tries;
        const std::uint64_t req_id = net.new_req_id();
        RecMsg msg;
        msg.req_id = req_id;
        msg.origin = node_.id;
        msg.op = RecOp::dhash_find_succs;
        msg.key = key;
        msg.location = key;
        msg.budget = budget;
        net.start_recursive(node_, std::move(msg));
        auto aw5_ = net.await_reply(node_, req_id, net.timeouts().recursive_hops);
        RecReply rep = co_await std::move(aw5_);
        if (rep.outcome == RecOutcomeKind::cancelled) {
            out.status = FetchResult::Status::cancelled;
            break;
        }
        if (rep.outcome == RecOutcomeKind::succ_list) {
            std::vector<NodeId> candidates = rep.list;
            if (candidates.size() > params_.replicas) candidates.resize(params_.replicas);
            bool found = false;
            while (!candidates.empty()) {
                std::size_t i = static_cast<std::size_t>(rng.below(candidates.size()));
                NodeId c = candidates[i];
                candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(i));
                ++out.probes;
                if (c == node_.id) {
                    const StoredItem* s = store_.find(key);
                    if (s != nullptr && !s->orphaned) {
                        out.item = s->item;
                        found = true;
                        break;
                    }
                    continue;
                }
                auto aw6_ = net.call(node_, c, MsgKind::get, Category::fetch,
                                           wire::kHeader + wire::kDigest, GetReq{key});
                auto g = co_await std::move(aw6_);
                if (g.cancelled()) {
                    out.status = FetchResult::Status::cancelled;
                    co_return out;
                }
                if (!g.ok()) continue;  // dead replica holder: next candidate
                const auto& gr = g.as<GetResp>();
                if (gr.found) {
                    out.item = gr.item;
                    found = true;
                    break;
                }
            }
            if (found) {
                out.status = FetchResult::Status::found;
                break;
            }
        }
        // findSuccessors timed out, or every candidate came up empty
        if (net.key_extinct(key)) {
            out.status = FetchResult::Status::extinct;
            break;
        }
        if (params_.fetch_retry_cap != 0 && tries >= params_.fetch_retry_cap) {
            out.status = FetchResult::Status::not_found;
            break;
        }
    }
    out.elapsed = static_cast<std::uint32_t>(net.engine().now() - t0);
    co_return out;
}

Op<bool> DhashStorage::put(const DataItem& item) {
    auto aw7_ = node_.lookup(item.key, Category::fetch, false);
    auto lr = co_await std::move(aw7_);
    if (!lr.ok() || lr.owner == 0) co_return false;
    if (lr.owner == node_.id) {
        store_.upsert(item);
        co_return true;
    }
    auto aw8_ = node_.net().call(node_, lr.owner, MsgKind::data_transfer,
                                       Category::data_movement,
                                       wire::kHeader + wire::kDigest + item.size, StoreReq{item});
    auto r = co_await std::move(aw8_);
    co_return r.ok() && r.as<StoreAck>().stored;
}

RpcReply DhashStorage::handle_rpc(NodeId, const Payload& payload) {
    RpcReply rep;
    if (const auto* get = std::get_if<GetReq>(&payload)) {
        GetResp resp;
        const StoredItem* s = store_.find(get->key);
        if (s != nullptr && !s->orphaned) {
            resp.found = true;
            resp.item = s->item;
            rep.bytes = wire::kHeader + wire::kDigest + s->item.size;
        }
        rep.payload = std::move(resp);
        return rep;
    }
    if (const auto* sr = std::get_if<StoreReq>(&payload)) {
        store_.upsert(sr->item);
        rep.payload = StoreAck{true};
        return rep;
    }
    if (const auto* offer = std::get_if<OfferReq>(&payload)) {
        OfferResp resp;
        const StoredItem* s = store_.find(offer->key);
        if (s != nullptr && s->item.version >= offer->version)
            resp.verdict = OfferResp::Verdict::have_current;
        else if (s != nullptr || !offer->update)
            resp.verdict = OfferResp::Verdict::want;
        else
            resp.verdict = OfferResp::Verdict::absent;
        rep.payload = resp;
        return rep;
    }
    rep.payload = StoreAck{false};
    return rep;
}

void DhashStorage::handle_oneway(NodeId src, Payload&& payload) {
    syncproto::handle(node_, store_, src, payload);
}

}  // namespace dhtsim::sim
