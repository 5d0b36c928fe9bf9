#include "dhtsim/ring.hpp"

#include <algorithm>

namespace dhtsim {

std::vector<KeyRange> intersect_ranges(const RingSpace& ring, const KeyRange& a, const KeyRange& b) {
    std::vector<KeyRange> out;
    if (a.full()) {
        if (!(b.full())) {
            out.push_back(b);
        } else {
            out.push_back(a);
        }
        return out;
    }
    if (b.full()) {
        out.push_back(a);
        return out;
    }
    // Work in position space along a: position t in [1, la] names id a.start + t.
    // An id x lies in b iff distance_cw(b.start, x) is in [1, lb].  Substituting
    // x = a.start + t gives (g + t) mod K in [1, lb] with g = dist(b.start, a.start),
    // i.e. t in the cyclic interval [(1 - g) mod K, (lb - g) mod K] of length lb.
    const std::uint64_t K = ring.size();
    const std::uint64_t la = ring.distance_cw(a.start, a.end);
    const std::uint64_t lb = ring.distance_cw(b.start, b.end);
    const std::uint64_t g = ring.distance_cw(b.start, a.start);
    const std::uint64_t c0 = ring.wrap(1 - g);

    auto emit = [&](std::uint64_t lo, std::uint64_t hi) {  // t-interval [lo, hi]
        lo = std::max<std::uint64_t>(lo, 1);
        hi = std::min<std::uint64_t>(hi, la);
        if (lo > hi) return;
        out.push_back(KeyRange{ring.add(a.start, lo - 1), ring.add(a.start, hi)});
    };
    if (c0 + lb - 1 < K) {
        emit(c0, c0 + lb - 1);
    } else {  // cyclic interval wraps zero
        emit(c0, K - 1);
        emit(0, lb - 1 - (K - c0));
    }
    return out;
}

}  // namespace dhtsim
