#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dhtsim/ring.hpp"
#include "dhtsim/rng.hpp"

namespace dhtsim {

enum class AllocationKind { successor, predecessor, block, finger, random };

const char* to_string(AllocationKind kind);
AllocationKind allocation_kind_from_string(const std::string& name);

// Parameters of the replica allocation function h(m, d).
//
// Replica index m runs from 1 to r_max; indices up to r_min form the core
// group, the rest are peripheral.  The node-count estimate n is configured,
// not measured.
struct AllocationConfig {
    AllocationKind kind = AllocationKind::successor;
    RingSpace ring{32};
    std::uint64_t n = 0;        // node count estimate N
    unsigned r_min = 1;
    unsigned r_max = 1;
    std::uint64_t random_key = 0;  // keyed PRF seed, random kind only

    std::uint64_t spacing() const { return ring.size() / n; }  // K/N
    std::uint64_t block_size() const {                         // K*R_MAX/N
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(ring.size()) * r_max) / n);
    }

    // Throws std::invalid_argument on violated invariants.
    void validate() const;
};

// Replica location h(m, d) for index m in [1, r_max].
std::uint64_t allocate(const AllocationConfig& cfg, unsigned m, std::uint64_t d);

// All candidate locations, ordered by index m = 1..r_max.
std::vector<std::pair<unsigned, std::uint64_t>> replica_locations(const AllocationConfig& cfg,
                                                                  std::uint64_t d);

// True if some replica location of d falls inside the arc.
bool arc_holds_replica_of(const AllocationConfig& cfg, const KeyRange& arc, std::uint64_t d);

// Smallest index m with h(m, d) inside the arc, or 0 if none.
unsigned min_replica_index_in(const AllocationConfig& cfg, const KeyRange& arc, std::uint64_t d);

// A maximal document sub-range on which h(m, .) acts as one translation.
// For every d in docs: h(m, d) = (d + shift) mod K.
struct TranslationPiece {
    KeyRange docs;
    std::uint64_t shift;
};

// Decomposes a document range into translation pieces under h(m, .).
// successor/predecessor/finger yield a single piece; block splits at the
// sub-block grid.  Not defined for the random kind (throws).
std::vector<TranslationPiece> translation_pieces(const AllocationConfig& cfg, const KeyRange& docs,
                                                 unsigned m);

// Image of a document range under h(m, .), as disjoint arcs.
std::vector<KeyRange> image_of_docs(const AllocationConfig& cfg, const KeyRange& docs, unsigned m);

// Preimage: document ranges whose index-m location falls inside `locations`.
std::vector<KeyRange> docs_for_locations(const AllocationConfig& cfg, const KeyRange& locations,
                                         unsigned m);

}  // namespace dhtsim
