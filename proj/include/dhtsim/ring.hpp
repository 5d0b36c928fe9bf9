#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace dhtsim {

using NodeId = std::uint64_t;
using Key = std::uint64_t;

// Identifier space [0, 2^bits) with clockwise modular arithmetic.
class RingSpace {
public:
    explicit constexpr RingSpace(unsigned bits = 32) : bits_(bits) {
        assert(bits >= 1 && bits <= 63);
    }

    constexpr unsigned bits() const { return bits_; }
    constexpr std::uint64_t size() const { return std::uint64_t{1} << bits_; }
    constexpr std::uint64_t mask() const { return size() - 1; }

    constexpr std::uint64_t wrap(std::uint64_t v) const { return v & mask(); }
    constexpr std::uint64_t add(std::uint64_t a, std::uint64_t off) const {
        return (a + off) & mask();
    }
    constexpr std::uint64_t sub(std::uint64_t a, std::uint64_t off) const {
        return (a - off) & mask();
    }

    // Clockwise distance from a to b: (b - a) mod K.
    constexpr std::uint64_t distance_cw(std::uint64_t a, std::uint64_t b) const {
        return (b - a) & mask();
    }

private:
    unsigned bits_;
};

// Clockwise arc (start, end].  start == end denotes the full ring.
struct KeyRange {
    std::uint64_t start = 0;
    std::uint64_t end = 0;

    constexpr bool full() const { return start == end; }
    friend constexpr bool operator==(const KeyRange&, const KeyRange&) = default;
};

constexpr bool range_contains(const RingSpace& ring, const KeyRange& r, std::uint64_t x) {
    if (r.full()) return true;
    return x != r.start && ring.distance_cw(r.start, x) <= ring.distance_cw(r.start, r.end);
}

// Number of identifiers inside the arc.
constexpr std::uint64_t range_length(const RingSpace& ring, const KeyRange& r) {
    if (r.full()) return ring.size();
    return ring.distance_cw(r.start, r.end);
}

// Exact intersection of two arcs; two circle arcs can meet in up to two
// disjoint pieces.  Empty arcs are never emitted.
std::vector<KeyRange> intersect_ranges(const RingSpace& ring, const KeyRange& a, const KeyRange& b);

}  // namespace dhtsim
