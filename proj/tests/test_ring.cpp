#include <doctest.h>

#include "dhtsim/ring.hpp"
#include "dhtsim/rng.hpp"

using namespace dhtsim;

TEST_CASE("distance_cw basics") {
    RingSpace r16(4);  // K = 16
    CHECK(r16.distance_cw(5, 5) == 0);
    CHECK(r16.distance_cw(14, 2) == 4);
    RingSpace r1024(10);
    CHECK(r1024.distance_cw(1000, 8) == 32);
}

TEST_CASE("distance_cw antisymmetry: d(a,b) + d(b,a) = K for a != b") {
    RingSpace ring(16);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t a = rng.below(ring.size());
        std::uint64_t b = rng.below(ring.size());
        if (a == b) {
            CHECK(ring.distance_cw(a, b) == 0);
        } else {
            CHECK(ring.distance_cw(a, b) + ring.distance_cw(b, a) == ring.size());
        }
    }
}

TEST_CASE("key range membership") {
    RingSpace ring(8);  // K = 256
    KeyRange r{10, 20};
    CHECK(!range_contains(ring, r, 10));  // start exclusive
    CHECK(range_contains(ring, r, 11));
    CHECK(range_contains(ring, r, 20));  // end inclusive
    CHECK(!range_contains(ring, r, 21));

    KeyRange wrap{250, 5};
    CHECK(range_contains(ring, wrap, 255));
    CHECK(range_contains(ring, wrap, 0));
    CHECK(range_contains(ring, wrap, 5));
    CHECK(!range_contains(ring, wrap, 6));
    CHECK(!range_contains(ring, wrap, 250));

    KeyRange full{42, 42};
    CHECK(full.full());
    for (std::uint64_t x : {0ull, 41ull, 42ull, 255ull}) CHECK(range_contains(ring, full, x));
    CHECK(range_length(ring, full) == 256);
    CHECK(range_length(ring, r) == 10);
    CHECK(range_length(ring, wrap) == 11);
}

TEST_CASE("range membership matches distance definition") {
    RingSpace ring(10);
    Rng rng(2);
    for (int i = 0; i < 2000; ++i) {
        KeyRange r{rng.below(ring.size()), rng.below(ring.size())};
        std::uint64_t x = rng.below(ring.size());
        if (r.full()) continue;
        bool expect =
            x != r.start && ring.distance_cw(r.start, x) <= ring.distance_cw(r.start, r.end);
        CHECK(range_contains(ring, r, x) == expect);
    }
}

TEST_CASE("arc intersection agrees with membership scan") {
    RingSpace ring(7);  // K = 128: exhaustive scan is cheap
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        KeyRange a{rng.below(128), rng.below(128)};
        KeyRange b{rng.below(128), rng.below(128)};
        auto parts = intersect_ranges(ring, a, b);
        // parts must be disjoint and cover exactly the common ids
        std::vector<bool> covered(128, false);
        for (const auto& p : parts) {
            for (std::uint64_t x = 0; x < 128; ++x) {
                if (!range_contains(ring, p, x)) continue;
                if (!p.full()) CHECK(!covered[x]);
                covered[x] = true;
            }
        }
        for (std::uint64_t x = 0; x < 128; ++x) {
            bool expect = range_contains(ring, a, x) && range_contains(ring, b, x);
            CHECK(covered[x] == expect);
        }
    }
}
