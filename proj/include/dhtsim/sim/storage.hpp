#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "dhtsim/ring.hpp"
#include "dhtsim/rng.hpp"
#include "dhtsim/sim/engine.hpp"
#include "dhtsim/sim/wire.hpp"

namespace dhtsim::sim {

class Node;
class Network;

struct StoredItem {
    DataItem item;
    bool orphaned = false;
    std::uint64_t orphan_round = 0;
};

// Per-node replica store, ordered by key for range synchronization.
class ReplicaStore {
public:
    // Inserts or upgrades (higher version wins).  Returns true when the
    // stored state changed.
    bool upsert(const DataItem& item, bool clear_orphan = true);
    bool erase(Key key);
    const StoredItem* find(Key key) const;
    StoredItem* find_mut(Key key);
    std::size_t size() const { return items_.size(); }
    void clear() { items_.clear(); }

    void for_each(const std::function<void(const StoredItem&)>& fn) const;
    void for_each_in(const RingSpace& ring, const KeyRange& range,
                     const std::function<void(const StoredItem&)>& fn) const;
    std::vector<Key> keys() const;
    std::vector<Key> keys_in(const RingSpace& ring, const KeyRange& range) const;

    struct Digest {
        std::uint64_t count = 0;
        std::uint64_t checksum = 0;
    };
    Digest digest(const RingSpace& ring, const KeyRange& range) const;
    std::vector<KeyDigest> key_digests(const RingSpace& ring, const KeyRange& range) const;

private:
    std::map<Key, StoredItem> items_;
};

struct FetchResult {
    enum class Status : std::uint8_t { found, not_found, extinct, cancelled } status =
        Status::not_found;
    DataItem item;
    std::uint32_t probes = 0;
    std::uint32_t elapsed = 0;

    bool found() const { return status == Status::found; }
};

// Cached owner lookups for maintenance; entries are revalidated once per
// maintenance round before reuse.
class OwnerCache {
public:
    struct Entry {
        KeyRange arc;
        NodeId owner = 0;
        std::vector<NodeId> succs;
        std::uint64_t round = 0;
    };

    Entry* find(const RingSpace& ring, std::uint64_t key);
    void insert(const RingSpace& ring, Entry entry);
    void forget_owner(NodeId owner);
    void clear() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<Entry> entries_;
};

// Storage protocol plugged into a node: replica placement, maintenance and
// the fetch path.
class Storage {
public:
    explicit Storage(Node& node) : node_(node) {}
    virtual ~Storage() = default;

    virtual const char* name() const = 0;
    virtual Task maintenance_round() = 0;
    virtual Op<FetchResult> fetch(Key key) = 0;
    virtual Op<bool> put(const DataItem& item) = 0;

    virtual RpcReply handle_rpc(NodeId src, const Payload& payload) = 0;
    virtual void handle_oneway(NodeId src, Payload&& payload) = 0;

    // Recursive-routing hooks.
    virtual bool can_preempt(Key) const { return false; }
    virtual std::optional<DataItem> item_for_final(Key key) const;

    ReplicaStore& store() { return store_; }
    const ReplicaStore& store() const { return store_; }

protected:
    // Owner resolution with per-round cache validation; nullptr on lookup
    // failure.  Entries resolved this round are reused without traffic.
    Op<const OwnerCache::Entry*> resolve_owner(std::uint64_t key, Category category);
    void prime_chain(NodeId owner, const KeyRange& arc, const std::vector<NodeId>& succs);

    Node& node_;
    ReplicaStore store_;
    OwnerCache cache_;
    std::uint64_t round_ = 0;
};

}  // namespace dhtsim::sim
