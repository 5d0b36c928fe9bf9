#include "dhtsim/sim/storage.hpp"

#include <algorithm>

#include "dhtsim/sim/node.hpp"

namespace dhtsim::sim {

bool ReplicaStore::upsert(const DataItem& item, bool clear_orphan) {
    auto [it, inserted] = items_.try_emplace(item.key, StoredItem{item, false, 0});
    if (inserted) return true;
    bool changed = false;
    if (item.version > it->second.item.version) {
        it->second.item = item;
        changed = true;
    }
    if (clear_orphan && it->second.orphaned) {
        it->second.orphaned = false;
        changed = true;
    }
    return changed;
}

bool ReplicaStore::erase(Key key) { return items_.erase(key) > 0; }

const StoredItem* ReplicaStore::find(Key key) const {
    auto it = items_.find(key);
    return it == items_.end() ? nullptr : &it->second;
}

StoredItem* ReplicaStore::find_mut(Key key) {
    auto it = items_.find(key);
    return it == items_.end() ? nullptr : &it->second;
}

void ReplicaStore::for_each(const std::function<void(const StoredItem&)>& fn) const {
    for (const auto& [k, v] : items_) fn(v);
}

void ReplicaStore::for_each_in(const RingSpace& ring, const KeyRange& range,
                               const std::function<void(const StoredItem&)>& fn) const {
    if (range.full()) {
        for_each(fn);
        return;
    }
    // (start, end]: one or two contiguous key spans
    auto emit_span = [&](Key lo, Key hi) {  // [lo, hi]
        for (auto it = items_.lower_bound(lo); it != items_.end() && it->first <= hi; ++it)
            fn(it->second);
    };
    if (range.start < range.end) {
        emit_span(range.start + 1, range.end);
    } else {
        if (range.start != ring.mask()) emit_span(range.start + 1, ring.mask());
        emit_span(0, range.end);
    }
}

std::vector<Key> ReplicaStore::keys() const {
    std::vector<Key> out;
    out.reserve(items_.size());
    for (const auto& [k, v] : items_) out.push_back(k);
    return out;
}

std::vector<Key> ReplicaStore::keys_in(const RingSpace& ring, const KeyRange& range) const {
    std::vector<Key> out;
    for_each_in(ring, range, [&](const StoredItem& s) { out.push_back(s.item.key); });
    return out;
}

ReplicaStore::Digest ReplicaStore::digest(const RingSpace& ring, const KeyRange& range) const {
    Digest d;
    for_each_in(ring, range, [&](const StoredItem& s) {
        ++d.count;
        d.checksum ^= splitmix64(s.item.key * 0x9e3779b97f4a7c15ull + s.item.version);
    });
    return d;
}

std::vector<KeyDigest> ReplicaStore::key_digests(const RingSpace& ring,
                                                 const KeyRange& range) const {
    std::vector<KeyDigest> out;
    for_each_in(ring, range, [&](const StoredItem& s) {
        out.push_back(KeyDigest{s.item.key, s.item.version});
    });
    return out;
}

OwnerCache::Entry* OwnerCache::find(const RingSpace& ring, std::uint64_t key) {
    for (auto& e : entries_)
        if (range_contains(ring, e.arc, key)) return &e;
    return nullptr;
}

void OwnerCache::insert(const RingSpace& ring, Entry entry) {
    // Drop entries overlapping the new arc; they are stale competitors.
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const Entry& e) {
                                      return e.owner == entry.owner ||
                                             !intersect_ranges(ring, e.arc, entry.arc).empty();
                                  }),
                   entries_.end());
    entries_.push_back(std::move(entry));
    const std::size_t cap = 96;
    if (entries_.size() > cap) entries_.erase(entries_.begin());
}

void OwnerCache::forget_owner(NodeId owner) {
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const Entry& e) { return e.owner == owner; }),
                   entries_.end());
}

// One validated owner answer covers its whole successor chain: consecutive
// list entries bound each other's arcs, so later keys in the same span
// resolve without any traffic this round.
void Storage::prime_chain(NodeId owner, const KeyRange& arc, const std::vector<NodeId>& succs) {
    const RingSpace& ring = node_.net().ring();
    OwnerCache::Entry head;
    head.owner = owner;
    head.arc = arc;
    head.succs = succs;
    head.round = round_;
    cache_.insert(ring, head);
    NodeId prev = owner;
    for (std::size_t i = 0; i < succs.size(); ++i) {
        OwnerCache::Entry chain;
        chain.arc = KeyRange{prev, succs[i]};
        chain.owner = succs[i];
        chain.succs.assign(succs.begin() + static_cast<std::ptrdiff_t>(i) + 1, succs.end());
        chain.round = round_;
        cache_.insert(ring, chain);
        prev = succs[i];
    }
}

Op<const OwnerCache::Entry*> Storage::resolve_owner(std::uint64_t key, Category category) {
    Network& net = node_.net();
    const RingSpace& ring = net.ring();

    if (OwnerCache::Entry* e = cache_.find(ring, key)) {
        if (e->round == round_) co_return e;
        // Revalidate once per maintenance round before reuse.
        NodeId owner = e->owner;
        if (owner == node_.id) {
            if (node_.owns(key)) {
                prime_chain(node_.id, node_.owned_arc(), node_.successors);
                co_return cache_.find(ring, key);
            }
            cache_.forget_owner(owner);
        } else {
            Network::RpcAwait aw1_ = net.call(node_, owner, MsgKind::lookup, category, wire::kHeader,
                                       StateReq{});
            auto r = co_await std::move(aw1_);
            if (r.cancelled()) co_return nullptr;
            if (r.ok()) {
                const auto& st = r.as<StateResp>();
                if (st.has_pred && range_contains(ring, KeyRange{st.pred, owner}, key)) {
                    prime_chain(owner, KeyRange{st.pred, owner}, st.succs);
                    co_return cache_.find(ring, key);
                }
            }
            cache_.forget_owner(owner);
            if (!node_.alive) co_return nullptr;
        }
    }

    auto aw2_ = node_.lookup(key, category, true);
    auto lr = co_await std::move(aw2_);
    if (!lr.ok() || lr.owner == 0) co_return nullptr;
    // Unknown predecessor: keep a degenerate single-key arc for this round.
    KeyRange arc = lr.has_pred ? KeyRange{lr.owner_pred, lr.owner}
                               : KeyRange{ring.sub(key, 1), key};
    prime_chain(lr.owner, arc, lr.succs);
    co_return cache_.find(ring, key);
}

}  // namespace dhtsim::sim
