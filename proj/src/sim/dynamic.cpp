#include "dhtsim/sim/dynamic.hpp"

#include <algorithm>

#include "dhtsim/bloom.hpp"
#include "dhtsim/sim/dhash.hpp"

namespace dhtsim::sim {

unsigned DynamicStorage::min_index_here(Key key) const {
    if (!node_.predecessor) return 0;
    return min_replica_index_in(params_.alloc, node_.owned_arc(), key);
}

bool DynamicStorage::can_preempt(Key key) const {
    if (!node_.predecessor) return false;
    if (!arc_holds_replica_of(params_.alloc, node_.owned_arc(), key)) return false;
    const StoredItem* s = store_.find(key);
    if (s == nullptr || s->orphaned) return false;
    if (params_.overload_threshold > 0) {
        Time now = node_.net().engine().now();
        if (now != preempt_tick_) {
            auto* self = const_cast<DynamicStorage*>(this);
            self->preempt_tick_ = now;
            self->preempts_this_tick_ = 0;
        }
        if (preempts_this_tick_ >= params_.overload_threshold) return false;
        const_cast<DynamicStorage*>(this)->preempts_this_tick_++;
    }
    return true;
}

// ---------------------------------------------------------------------------
// maintenance

Task DynamicStorage::maintenance_round() {
    if (!node_.alive) co_return;
    ++round_;
    jobs_.clear();
    // core runs two passes per interval: gather the owned documents onto the
    // owner, then redistribute them onto the core holders
    auto aw1_ = plan_core_jobs();
    bool planned = co_await std::move(aw1_);
    if (!node_.alive) co_return;
    if (planned) {
        auto aw2_ = core_pass(SyncDirection::gather);
        co_await std::move(aw2_);
        if (!node_.alive) co_return;
        co_await Delay{node_.net().engine(), params_.sync_settle};
        if (!node_.alive) co_return;
        auto aw3_ = core_pass(SyncDirection::distribute);
        co_await std::move(aw3_);
        if (!node_.alive) co_return;
        co_await Delay{node_.net().engine(), params_.sync_settle};
        if (!node_.alive) co_return;
    }
    auto aw4_ = peripheral_pass();
    co_await std::move(aw4_);
    if (!node_.alive) co_return;
    auto aw5_ = global_pass();
    co_await std::move(aw5_);
}

// Resolves the (document-subrange, holder) cover of h(index, docs).  Multiple
// entries mean the image straddles holder boundaries or block grid cells.
Op<bool> DynamicStorage::resolve_cover(KeyRange docs, unsigned index,
                                       std::vector<std::pair<KeyRange, NodeId>>& out) {
    const AllocationConfig& cfg = params_.alloc;
    const RingSpace& ring = node_.net().ring();
    for (const TranslationPiece& piece : translation_pieces(cfg, docs, index)) {
        KeyRange img{ring.add(piece.docs.start, piece.shift),
                     ring.add(piece.docs.end, piece.shift)};
        KeyRange rest = img;
        for (unsigned guard = 0; guard < 64; ++guard) {
            auto aw6_ = resolve_owner(ring.add(rest.start, 1), Category::maintenance_overhead);
            const OwnerCache::Entry* entry = co_await std::move(aw6_);
            if (entry == nullptr || !node_.alive) co_return false;
            KeyRange covered{rest.start, entry->arc.end};
            if (ring.distance_cw(rest.start, entry->arc.end) >=
                ring.distance_cw(rest.start, rest.end))
                covered.end = rest.end;
            out.emplace_back(KeyRange{ring.sub(covered.start, piece.shift),
                                      ring.sub(covered.end, piece.shift)},
                             entry->owner);
            if (covered.end == rest.end) break;
            rest = KeyRange{covered.end, rest.end};
        }
    }
    co_return true;
}

// Places one document fragment on core indices 2..R_MIN, spilling allocation
// collisions onto consecutive peripheral indices.  When an index's image
// straddles several holders the fragment splits and each part is planned
// independently, so every emitted job stays inside its holder's keyspace and
// per-key replica chains remain contiguous.
Op<bool> DynamicStorage::plan_fragment(KeyRange docs, std::vector<NodeId> used, unsigned slot,
                                       unsigned overflow_next, unsigned pending_overflow,
                                       unsigned depth) {
    const AllocationConfig& cfg = params_.alloc;
    if (depth > 24) co_return false;
    while (true) {
        unsigned index;
        if (slot <= cfg.r_min) {
            index = slot;
        } else if (pending_overflow > 0 && overflow_next <= cfg.r_max) {
            index = overflow_next;
        } else {
            break;
        }
        std::vector<std::pair<KeyRange, NodeId>> cover;
        auto aw7_ = resolve_cover(docs, index, cover);
        bool ok = co_await std::move(aw7_);
        if (!ok || cover.empty()) co_return false;  // retry next round

        bool split = false;
        for (std::size_t i = 1; i < cover.size(); ++i)
            if (cover[i].second != cover[0].second) split = true;
        if (split) {
            for (const auto& [sub, holder] : cover) {
                (void)holder;
                auto aw8_ = plan_fragment(sub, used, slot, overflow_next, pending_overflow,
                                       depth + 1);
                co_await std::move(aw8_);
                if (!node_.alive) co_return false;
            }
            co_return true;
        }

        NodeId holder = cover[0].second;
        bool collision;
        if (std::find(used.begin(), used.end(), holder) != used.end()) {
            collision = true;  // holder already covers this fragment at a lower index
        } else {
            collision = false;
            used.push_back(holder);
            if (holder != node_.id) jobs_.push_back(SyncJob{holder, index, docs, {}});
        }
        if (slot <= cfg.r_min) {
            ++slot;
            if (collision) ++pending_overflow;
        } else {
            ++overflow_next;
            if (!collision) --pending_overflow;
        }
    }
    co_return true;
}

Op<bool> DynamicStorage::plan_core_jobs() {
    const AllocationConfig& cfg = params_.alloc;
    if (!node_.predecessor) co_return false;
    if (cfg.kind == AllocationKind::random) {
        auto rnd = plan_random_kind_jobs();
        bool ok = co_await std::move(rnd);
        co_return ok;
    }

    KeyRange arc = node_.owned_arc();
    std::vector<KeyRange> doc_ranges = docs_for_locations(cfg, arc, 1);
    for (const KeyRange& docs : doc_ranges) {
        auto aw10_ = plan_fragment(docs, {node_.id}, 2, cfg.r_min + 1, 0, 0);
        co_await std::move(aw10_);
        if (!node_.alive) co_return false;
    }
    co_return true;
}

Op<bool> DynamicStorage::plan_random_kind_jobs() {
    // Random placement has no range structure: plan per stored item.  Owners
    // push to core holders; holders push back to the owner so a fresh owner
    // recovers its documents.
    const AllocationConfig& cfg = params_.alloc;
    KeyRange arc = node_.owned_arc();
    std::map<std::pair<NodeId, unsigned>, std::vector<KeyDigest>> per_holder;
    std::vector<std::pair<Key, std::uint32_t>> snapshot;
    store_.for_each([&](const StoredItem& s) {
        snapshot.emplace_back(s.item.key, s.item.version);
    });
    for (const auto& [key, version] : snapshot) {
        if (!node_.alive) co_return false;
        if (range_contains(cfg.ring, arc, allocate(cfg, 1, key))) {
            // we own it: offer to every core holder
            std::vector<NodeId> used{node_.id};
            for (unsigned m = 2; m <= cfg.r_min; ++m) {
                auto aw11_ = resolve_owner(allocate(cfg, m, key), Category::maintenance_overhead);
                const OwnerCache::Entry* e = co_await std::move(aw11_);
                if (e == nullptr || !node_.alive) continue;
                NodeId holder = e->owner;
                if (std::find(used.begin(), used.end(), holder) != used.end()) {
                    for (unsigned p = cfg.r_min + 1; p <= cfg.r_max; ++p) {
                        auto aw12_ = resolve_owner(
                            allocate(cfg, p, key), Category::maintenance_overhead);
                        const OwnerCache::Entry* pe = co_await std::move(aw12_);
                        if (pe == nullptr || !node_.alive) break;
                        if (std::find(used.begin(), used.end(), pe->owner) != used.end()) continue;
                        used.push_back(pe->owner);
                        if (pe->owner != node_.id)
                            per_holder[{pe->owner, p}].push_back(KeyDigest{key, version});
                        break;
                    }
                } else {
                    used.push_back(holder);
                    per_holder[{holder, m}].push_back(KeyDigest{key, version});
                }
            }
        } else if (min_index_here(key) != 0 && min_index_here(key) <= cfg.r_min) {
            // core holder: make sure the owner still has its copy
            auto aw13_ = resolve_owner(allocate(cfg, 1, key), Category::maintenance_overhead);
            const OwnerCache::Entry* e = co_await std::move(aw13_);
            if (e == nullptr || !node_.alive) continue;
            if (e->owner != node_.id)
                per_holder[{e->owner, 1}].push_back(KeyDigest{key, version});
        }
    }
    for (auto& [hk, digests] : per_holder)
        jobs_.push_back(SyncJob{hk.first, hk.second, KeyRange{}, std::move(digests)});
    co_return true;
}

Op<bool> DynamicStorage::core_pass(SyncDirection direction) {
    for (const SyncJob& job : jobs_) {
        if (!node_.alive) co_return false;
        if (!job.explicit_keys.empty()) {
            if (direction == SyncDirection::distribute)
                syncproto::announce_per_item(node_, job.holder, job.explicit_keys);
            continue;
        }
        syncproto::announce(node_, job.holder, job.docs, job.index, direction);
    }
    co_return true;
}

Op<bool> DynamicStorage::peripheral_pass() {
    const AllocationConfig& cfg = params_.alloc;
    Network& net = node_.net();
    if (!node_.predecessor) co_return false;

    // Group stored peripheral replicas by their chain predecessor.
    std::map<std::pair<NodeId, unsigned>, std::vector<Key>> groups;
    std::vector<Key> snapshot = store_.keys();
    for (Key key : snapshot) {
        unsigned m = min_index_here(key);
        if (m == 0 || m <= cfg.r_min) continue;
        auto aw14_ = resolve_owner(allocate(cfg, m - 1, key), Category::maintenance_overhead);
        const OwnerCache::Entry* e = co_await std::move(aw14_);
        if (e == nullptr) continue;  // marking deferred
        if (!node_.alive) co_return false;
        groups[{e->owner, m - 1}].push_back(key);
    }

    for (const auto& [hk, keys] : groups) {
        auto [holder, prev_index] = hk;
        if (!node_.alive) co_return false;
        auto judge = [&](Key key, bool chain_has_it) {
            StoredItem* s = store_.find_mut(key);
            if (s == nullptr) return;
            if (chain_has_it) {
                s->orphaned = false;  // replaced by maintenance; serve again
                return;
            }
            if (s->orphaned && s->orphan_round < round_) {
                store_.erase(key);  // grace interval elapsed
            } else if (!s->orphaned) {
                s->orphaned = true;
                s->orphan_round = round_;
            }
        };
        if (holder == node_.id) {
            KeyRange arc = node_.owned_arc();
            for (Key key : keys) {
                const StoredItem* prev = store_.find(key);
                bool has = prev != nullptr && !prev->orphaned &&
                           range_contains(cfg.ring, arc, allocate(cfg, prev_index, key));
                judge(key, has);
            }
            continue;
        }
        auto aw15_ = net.call(node_, holder, MsgKind::bloom_summary,
                                   Category::maintenance_overhead, wire::kHeader,
                                   BloomReq{prev_index});
        auto r = co_await std::move(aw15_);
        if (r.cancelled()) co_return false;
        if (!r.ok()) continue;  // unreachable predecessor: defer
        const auto& resp = r.as<BloomResp>();
        if (!resp.filter) continue;
        for (Key key : keys) judge(key, resp.filter->may_contain(key));
    }
    co_return true;
}

Op<bool> DynamicStorage::global_pass() {
    const AllocationConfig& cfg = params_.alloc;
    Network& net = node_.net();
    std::vector<Key> snapshot = store_.keys();
    for (Key key : snapshot) {
        if (!node_.alive) co_return false;
        if (!node_.predecessor) co_return false;
        if (min_index_here(key) != 0) continue;  // still in the replica group
        auto aw16_ = resolve_owner(allocate(cfg, 1, key), Category::maintenance_overhead);
        const OwnerCache::Entry* entry = co_await std::move(aw16_);
        if (entry == nullptr || entry->owner == node_.id) continue;
        if (!node_.alive) co_return false;
        const StoredItem* s = store_.find(key);
        if (s == nullptr) continue;
        auto aw17_ = net.call(node_, entry->owner, MsgKind::offer,
                                       Category::maintenance_overhead,
                                       wire::kHeader + wire::kDigest,
                                       OfferReq{key, s->item.version, false});
        auto offer = co_await std::move(aw17_);
        if (offer.cancelled()) co_return false;
        if (!offer.ok()) continue;  // retained until next round
        if (offer.as<OfferResp>().verdict == OfferResp::Verdict::want) {
            s = store_.find(key);
            if (s == nullptr) continue;
            auto aw18_ = net.call(node_, entry->owner, MsgKind::data_transfer,
                                        Category::data_movement,
                                        wire::kHeader + wire::kDigest + s->item.size,
                                        StoreReq{s->item});
            auto tx = co_await std::move(aw18_);
            if (tx.cancelled()) co_return false;
            if (!tx.ok()) continue;
        }
        store_.erase(key);
    }
    co_return true;
}

// ---------------------------------------------------------------------------
// fetch (Algorithm 2) and recursive gets

Op<FetchResult> DynamicStorage::fetch(Key key) {
    const AllocationConfig& cfg = params_.alloc;
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
        std::vector<unsigned> core, peri;
        for (unsigned m = 1; m <= cfg.r_min; ++m) core.push_back(m);
        for (unsigned m = cfg.r_min + 1; m <= cfg.r_max; ++m) peri.push_back(m);
        bool found = false;

        while (!core.empty() || !peri.empty()) {
            std::vector<unsigned>* pool;
            if (params_.core_first)
                pool = core.empty() ? &peri : &core;
            else
                pool = rng.below(core.size() + peri.size()) < core.size() ? &core : &peri;
            std::size_t i = static_cast<std::size_t>(rng.below(pool->size()));
            unsigned m = (*pool)[i];
            pool->erase(pool->begin() + static_cast<std::ptrdiff_t>(i));

            ++out.probes;
            const std::uint64_t req_id = net.new_req_id();
            RecMsg msg;
            msg.req_id = req_id;
            msg.origin = node_.id;
            msg.op = RecOp::dynamic_get;
            msg.key = key;
            msg.location = allocate(cfg, m, key);
            msg.budget = budget;
            net.start_recursive(node_, std::move(msg));
            auto aw19_ = net.await_reply(node_, req_id, net.timeouts().recursive_hops);
            RecReply rep = co_await std::move(aw19_);
            if (rep.outcome == RecOutcomeKind::cancelled) {
                out.status = FetchResult::Status::cancelled;
                co_return out;
            }
            if (rep.outcome == RecOutcomeKind::item) {
                out.item = rep.item;
                found = true;
                break;
            }
            if (rep.outcome == RecOutcomeKind::miss && m > cfg.r_min && !params_.remove_single) {
                // invariant 3: nothing above an empty peripheral location
                peri.erase(std::remove_if(peri.begin(), peri.end(),
                                          [m](unsigned x) { return x >= m; }),
                           peri.end());
            }
            // timeouts prune nothing: the replica may exist behind a dead hop
        }
        if (found) {
            out.status = FetchResult::Status::found;
            break;
        }
        if (net.key_extinct(key)) {
            out.status = FetchResult::Status::extinct;
            break;
        }
        if (params_.fetch_retry_cap != 0 && tries >= params_.fetch_retry_cap) {
            out.status = FetchResult::Status::not_found;
            break;
        }
        // Algorithm 2 resets the index list and keeps trying.
    }
    out.elapsed = static_cast<std::uint32_t>(net.engine().now() - t0);
    co_return out;
}

Op<bool> DynamicStorage::put(const DataItem& item) {
    std::uint64_t owner_loc = allocate(params_.alloc, 1, item.key);
    auto aw20_ = node_.lookup(owner_loc, Category::fetch, false);
    auto lr = co_await std::move(aw20_);
    if (!lr.ok() || lr.owner == 0) co_return false;
    if (lr.owner == node_.id) {
        store_.upsert(item);
        co_return true;
    }
    auto aw21_ = node_.net().call(node_, lr.owner, MsgKind::data_transfer,
                                       Category::data_movement,
                                       wire::kHeader + wire::kDigest + item.size, StoreReq{item});
    auto r = co_await std::move(aw21_);
    co_return r.ok() && r.as<StoreAck>().stored;
}

Op<unsigned> DynamicStorage::update(const DataItem& item, bool strict) {
    const AllocationConfig& cfg = params_.alloc;
    Network& net = node_.net();
    unsigned updated = 0;
    unsigned consecutive_empty = 0;
    for (unsigned m = 1; m <= cfg.r_max; ++m) {
        if (!node_.alive) break;
        std::uint64_t loc = allocate(cfg, m, item.key);
        auto aw22_ = node_.lookup(loc, Category::fetch, false);
        auto lr = co_await std::move(aw22_);
        if (!lr.ok() || lr.owner == 0) continue;  // unreachable; maintenance reconciles
        if (lr.owner == node_.id) {
            StoredItem* s = store_.find_mut(item.key);
            if (s != nullptr) {
                if (s->item.version < item.version) {
                    s->item = item;
                    ++updated;
                }
                consecutive_empty = 0;
            } else if (m > cfg.r_min) {
                ++consecutive_empty;
            }
        } else {
            auto aw23_ = net.call(node_, lr.owner, MsgKind::offer, Category::fetch,
                                  wire::kHeader + wire::kDigest,
                                  OfferReq{item.key, item.version, true});
            auto offer = co_await std::move(aw23_);
            if (!offer.ok()) continue;
            auto verdict = offer.as<OfferResp>().verdict;
            if (verdict == OfferResp::Verdict::want) {
                auto aw24_ = net.call(node_, lr.owner, MsgKind::data_transfer,
                                            Category::data_movement,
                                            wire::kHeader + wire::kDigest + item.size,
                                            StoreReq{item});
                auto tx = co_await std::move(aw24_);
                if (tx.ok()) {
                    ++updated;
                    consecutive_empty = 0;
                }
            } else if (verdict == OfferResp::Verdict::have_current) {
                consecutive_empty = 0;
            } else if (m > cfg.r_min) {
                ++consecutive_empty;
            }
        }
        if (!strict && consecutive_empty >= params_.stop_after_empty) break;
    }
    co_return updated;
}

RpcReply DynamicStorage::handle_rpc(NodeId, const Payload& payload) {
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
    if (const auto* breq = std::get_if<BloomReq>(&payload)) {
        const AllocationConfig& cfg = params_.alloc;
        auto filter = std::make_shared<BloomFilter>(
            std::max<std::size_t>(store_.size(), 8), params_.bloom_bits_per_item,
            params_.bloom_hashes);
        if (node_.predecessor) {
            KeyRange arc = node_.owned_arc();
            store_.for_each([&](const StoredItem& s) {
                if (s.orphaned) return;
                if (range_contains(cfg.ring, arc, allocate(cfg, breq->index, s.item.key)))
                    filter->insert(s.item.key);
            });
        }
        rep.bytes = wire::kHeader + filter->byte_size();
        rep.payload = BloomResp{std::move(filter)};
        return rep;
    }
    rep.payload = StoreAck{false};
    return rep;
}

void DynamicStorage::handle_oneway(NodeId src, Payload&& payload) {
    syncproto::handle(node_, store_, src, payload);
}

}  // namespace dhtsim::sim
