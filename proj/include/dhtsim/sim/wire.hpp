#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "dhtsim/bloom.hpp"
#include "dhtsim/ring.hpp"

namespace dhtsim::sim {

enum class MsgKind : std::uint8_t {
    lookup,
    get,
    recursive_get,
    synchronize_summary,
    data_transfer,
    bloom_summary,
    chord_repair,
    offer,
};

enum class Category : std::uint8_t {
    maintenance_overhead = 0,
    data_movement = 1,
    chord_repair = 2,
    fetch = 3,
};
inline constexpr std::size_t kCategoryCount = 4;
const char* to_string(Category c);

// Wire cost model.  Every message pays a fixed header; key digests, node
// references and item payloads are priced per entry.  Ranges, checksums and
// flags ride in the header.
namespace wire {
inline constexpr std::uint64_t kHeader = 40;
inline constexpr std::uint64_t kDigest = 24;
inline constexpr std::uint64_t kNodeRef = 8;

inline std::uint64_t digests(std::size_t n) { return kHeader + kDigest * n; }
inline std::uint64_t refs(std::size_t n) { return kHeader + kNodeRef * n; }
}  // namespace wire

struct DataItem {
    Key key = 0;
    std::uint32_t size = 0;       // payload bytes
    std::uint32_t version = 0;

    friend bool operator==(const DataItem&, const DataItem&) = default;
};

struct KeyDigest {
    Key key = 0;
    std::uint32_t version = 0;
};

// ---- RPC payloads (request/response handled synchronously at the callee) ----

// Ring state probe: stabilization, predecessor checks, cache validation.
struct StateReq {};
struct StateResp {
    bool has_pred = false;
    NodeId pred = 0;
    std::vector<NodeId> succs;
};

struct NotifyMsg {  // one-way: "I may be your predecessor"
    NodeId candidate = 0;
};

// One step of an iterative lookup.
struct LookupStepReq {
    std::uint64_t target = 0;
    std::vector<NodeId> exclude;
};
struct LookupStepResp {
    bool final = false;
    NodeId node = 0;  // owner if final, next hop otherwise
};

// Direct fetch probe of one replica holder.
struct GetReq {
    Key key = 0;
};
struct GetResp {
    bool found = false;
    DataItem item;
};

// Client-side insert at the key's owner.
struct StoreReq {
    DataItem item;
};
struct StoreAck {
    bool stored = false;
};

// Offer of an item the sender no longer (or newly) holds.
struct OfferReq {
    Key key = 0;
    std::uint32_t version = 0;
    bool update = false;  // update offers touch existing replicas only
};
struct OfferResp {
    enum class Verdict : std::uint8_t { have_current, want, absent } verdict =
        Verdict::absent;
};

// Bloom summary of the callee's replicas with the given index.
struct BloomReq {
    unsigned index = 0;
};
struct BloomResp {
    std::shared_ptr<BloomFilter> filter;  // wire size = header + filter bytes
};

// ---- One-way synchronization choreography ----

enum class SyncDirection : std::uint8_t { gather, distribute };

// Checksummed range announcement; the receiver stays silent when its own
// digest state over the range matches.
struct SyncReq {
    KeyRange docs;
    unsigned index = 0;  // replica index being maintained (0 = dhash local)
    SyncDirection direction = SyncDirection::gather;
    std::uint64_t count = 0;
    std::uint64_t checksum = 0;
    std::vector<KeyDigest> explicit_keys;  // non-empty: per-item sync (random kind)
    bool per_item = false;
};

// Mismatch reply: the responder's digests over the requested range.
struct SyncDigests {
    KeyRange docs;
    unsigned index = 0;
    SyncDirection direction = SyncDirection::gather;
    std::vector<KeyDigest> digests;
    bool per_item = false;
};

// Keys the gathering side still needs.
struct SyncWant {
    std::vector<Key> keys;
};

// Item payload batch.
struct TransferBatch {
    std::vector<DataItem> items;
    bool from_owner_sync = false;  // owner-vouched: clears orphan marks
};

// ---- Recursive routing ----

enum class RecOp : std::uint8_t { dhash_find_succs, dynamic_get };

struct RecMsg {
    std::uint64_t req_id = 0;
    NodeId origin = 0;
    RecOp op = RecOp::dynamic_get;
    Key key = 0;
    std::uint64_t location = 0;
    bool final = false;
    std::uint32_t hops = 0;
    std::uint32_t budget = 64;
    std::vector<NodeId> tried;  // dead next-hops seen by forwarders
};

enum class RecOutcomeKind : std::uint8_t { item, miss, succ_list, timeout, cancelled };

struct RecReply {
    std::uint64_t req_id = 0;
    RecOutcomeKind outcome = RecOutcomeKind::miss;
    DataItem item;
    std::vector<NodeId> list;
    std::uint32_t hops = 0;
};

using Payload = std::variant<StateReq, StateResp, NotifyMsg, LookupStepReq, LookupStepResp, GetReq,
                             GetResp, StoreReq, StoreAck, OfferReq, OfferResp, BloomReq, BloomResp,
                             SyncReq, SyncDigests, SyncWant, TransferBatch, RecMsg, RecReply>;

struct RpcResult {
    enum class Status : std::uint8_t { ok, timeout, cancelled } status = Status::timeout;
    Payload payload;

    bool ok() const { return status == Status::ok; }
    bool cancelled() const { return status == Status::cancelled; }
    template <typename T>
    const T& as() const {
        return std::get<T>(payload);
    }
};

struct RpcReply {
    Payload payload;
    std::uint64_t bytes = wire::kHeader;
    Category category;  // defaults to the request category at the call site
    bool has_category = false;
};

}  // namespace dhtsim::sim
