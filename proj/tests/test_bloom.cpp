#include <doctest.h>

#include "dhtsim/bloom.hpp"
#include "dhtsim/rng.hpp"

using namespace dhtsim;

TEST_CASE("bloom: no false negatives over 10^4 trials") {
    BloomFilter bf(10000);
    Rng rng(123);
    std::vector<std::uint64_t> keys;
    keys.reserve(10000);
    for (int i = 0; i < 10000; ++i) keys.push_back(rng.next());
    for (auto k : keys) bf.insert(k);
    CHECK(bf.inserted_count() == 10000);
    for (auto k : keys) CHECK(bf.may_contain(k));
}

TEST_CASE("bloom: false positive rate within 2x of the formula") {
    BloomFilter bf(5000);
    Rng rng(321);
    for (int i = 0; i < 5000; ++i) bf.insert(rng.next() | 1);  // odd keys inserted
    double expect = bf.expected_false_positive_rate();
    std::uint64_t fp = 0, trials = 200000;
    for (std::uint64_t i = 0; i < trials; ++i) {
        std::uint64_t probe = (rng.next() << 1);  // even keys never inserted
        if (bf.may_contain(probe)) ++fp;
    }
    double rate = double(fp) / double(trials);
    CHECK(rate <= 2.0 * expect);
    CHECK(rate >= expect / 2.0);
}

TEST_CASE("bloom: wire size accounting") {
    BloomFilter bf(100, 10, 7);
    CHECK(bf.bit_count() == 1000);
    CHECK(bf.byte_size() == 125);
}
