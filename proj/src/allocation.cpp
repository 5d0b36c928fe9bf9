#include "dhtsim/allocation.hpp"

#include <algorithm>
#include <cmath>

namespace dhtsim {

const char* to_string(AllocationKind kind) {
    switch (kind) {
        case AllocationKind::successor: return "successor";
        case AllocationKind::predecessor: return "predecessor";
        case AllocationKind::block: return "block";
        case AllocationKind::finger: return "finger";
        case AllocationKind::random: return "random";
    }
    return "?";
}

AllocationKind allocation_kind_from_string(const std::string& name) {
    if (name == "successor") return AllocationKind::successor;
    if (name == "predecessor") return AllocationKind::predecessor;
    if (name == "block") return AllocationKind::block;
    if (name == "finger") return AllocationKind::finger;
    if (name == "random") return AllocationKind::random;
    throw std::invalid_argument("unknown allocation kind: " + name);
}

void AllocationConfig::validate() const {
    if (n == 0 || n > ring.size()) throw std::invalid_argument("allocation: bad node count");
    if (r_min < 1 || r_min > r_max) throw std::invalid_argument("allocation: need 1 <= r_min <= r_max");
    if (spacing() == 0) throw std::invalid_argument("allocation: K/N is zero");
    // Close-spaced kinds need peripheral headroom to absorb allocation
    // collisions: R_MAX - R_MIN >= ceil(1.645*sqrt(R_MIN)).
    if (kind == AllocationKind::successor || kind == AllocationKind::predecessor ||
        kind == AllocationKind::block) {
        auto headroom = static_cast<unsigned>(std::ceil(1.645 * std::sqrt(double(r_min))));
        if (r_max - r_min < headroom)
            throw std::invalid_argument("allocation: r_max - r_min below collision headroom " +
                                        std::to_string(headroom));
    }
}

namespace {

// Exact 2^m * K / N, reduced mod K.  Finger offsets computed this way stay
// distinct after wrapping; an integer-rounded exponent would collapse every
// offset with m + delta >= bits onto zero.
std::uint64_t finger_offset(const AllocationConfig& cfg, unsigned m) {
    unsigned __int128 numer = static_cast<unsigned __int128>(cfg.ring.size()) << m;
    return cfg.ring.wrap(static_cast<std::uint64_t>(numer / cfg.n));
}

std::uint64_t random_location(const AllocationConfig& cfg, unsigned m, std::uint64_t d) {
    std::uint64_t h = splitmix64(cfg.random_key ^ splitmix64(d * 0x9e3779b97f4a7c15ull + m));
    return cfg.ring.wrap(h);
}

}  // namespace

std::uint64_t allocate(const AllocationConfig& cfg, unsigned m, std::uint64_t d) {
    const RingSpace& ring = cfg.ring;
    switch (cfg.kind) {
        case AllocationKind::successor:
            return ring.add(d, m * cfg.spacing());
        case AllocationKind::predecessor:
            return ring.sub(d, m * cfg.spacing());
        case AllocationKind::block: {
            std::uint64_t b = cfg.block_size();
            std::uint64_t c = cfg.spacing();
            return ring.wrap(d - (d % b) + (d % c) + m * c);
        }
        case AllocationKind::finger:
            return ring.add(d, finger_offset(cfg, m));
        case AllocationKind::random:
            return random_location(cfg, m, d);
    }
    return d;
}

std::vector<std::pair<unsigned, std::uint64_t>> replica_locations(const AllocationConfig& cfg,
                                                                  std::uint64_t d) {
    std::vector<std::pair<unsigned, std::uint64_t>> out;
    out.reserve(cfg.r_max);
    for (unsigned m = 1; m <= cfg.r_max; ++m) out.emplace_back(m, allocate(cfg, m, d));
    return out;
}

bool arc_holds_replica_of(const AllocationConfig& cfg, const KeyRange& arc, std::uint64_t d) {
    return min_replica_index_in(cfg, arc, d) != 0;
}

unsigned min_replica_index_in(const AllocationConfig& cfg, const KeyRange& arc, std::uint64_t d) {
    for (unsigned m = 1; m <= cfg.r_max; ++m)
        if (range_contains(cfg.ring, arc, allocate(cfg, m, d))) return m;
    return 0;
}

namespace {

// Splits (start, start+len] at multiples of the block grids and emits one
// TranslationPiece per maximal segment of constant (d div B, d div c).
// On such a segment h(m,d) = d + (k*B - j*c + m*c).
void block_pieces(const AllocationConfig& cfg, std::uint64_t start, std::uint64_t len, unsigned m,
                  std::vector<TranslationPiece>& out) {
    const RingSpace& ring = cfg.ring;
    const std::uint64_t c = cfg.spacing();
    const std::uint64_t b = cfg.block_size();
    std::uint64_t done = 0;
    while (done < len) {
        std::uint64_t p = ring.add(start, done + 1);  // first id of the remaining segment
        std::uint64_t j = p / c;
        std::uint64_t k = p / b;
        std::uint64_t next_boundary = std::min({(j + 1) * c, (k + 1) * b, ring.size()});
        std::uint64_t seg = std::min(len - done, next_boundary - p);
        std::uint64_t shift = ring.wrap(k * b - j * c + m * c);
        out.push_back({KeyRange{ring.add(start, done), ring.add(start, done + seg)}, shift});
        done += seg;
    }
}

}  // namespace

std::vector<TranslationPiece> translation_pieces(const AllocationConfig& cfg, const KeyRange& docs,
                                                 unsigned m) {
    const RingSpace& ring = cfg.ring;
    std::vector<TranslationPiece> out;
    switch (cfg.kind) {
        case AllocationKind::successor:
            out.push_back({docs, ring.wrap(m * cfg.spacing())});
            return out;
        case AllocationKind::predecessor:
            out.push_back({docs, ring.wrap(0 - m * cfg.spacing())});
            return out;
        case AllocationKind::finger:
            out.push_back({docs, finger_offset(cfg, m)});
            return out;
        case AllocationKind::block: {
            std::uint64_t len = docs.full() ? ring.size() : ring.distance_cw(docs.start, docs.end);
            block_pieces(cfg, docs.start, len, m, out);
            return out;
        }
        case AllocationKind::random:
            throw std::logic_error("translation_pieces: random allocation has no range structure");
    }
    return out;
}

std::vector<KeyRange> image_of_docs(const AllocationConfig& cfg, const KeyRange& docs, unsigned m) {
    std::vector<KeyRange> out;
    for (const auto& piece : translation_pieces(cfg, docs, m))
        out.push_back(KeyRange{cfg.ring.add(piece.docs.start, piece.shift),
                               cfg.ring.add(piece.docs.end, piece.shift)});
    return out;
}

std::vector<KeyRange> docs_for_locations(const AllocationConfig& cfg, const KeyRange& locations,
                                         unsigned m) {
    const RingSpace& ring = cfg.ring;
    std::vector<KeyRange> out;
    if (cfg.kind != AllocationKind::block) {
        std::uint64_t shift = translation_pieces(cfg, KeyRange{0, 1}, m).front().shift;
        out.push_back(KeyRange{ring.sub(locations.start, shift), ring.sub(locations.end, shift)});
        return out;
    }
    // Block: enumerate the whole ring's translation pieces and intersect each
    // piece's image with the requested location range.
    for (const auto& piece : translation_pieces(cfg, KeyRange{0, 0}, m)) {
        KeyRange img{ring.add(piece.docs.start, piece.shift), ring.add(piece.docs.end, piece.shift)};
        for (const auto& part : intersect_ranges(ring, img, locations))
            out.push_back(
                KeyRange{ring.sub(part.start, piece.shift), ring.sub(part.end, piece.shift)});
    }
    return out;
}

}  // namespace dhtsim
