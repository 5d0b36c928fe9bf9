#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dhtsim/rng.hpp"

namespace dhtsim {

// Plain Bloom filter over 64-bit keys, double hashing with k probes.
// Never false-negative for inserted keys.
class BloomFilter {
public:
    explicit BloomFilter(std::size_t expected_items, unsigned bits_per_item = 10, unsigned k = 7)
        : k_(k), bits_(std::max<std::size_t>(std::size_t{8}, expected_items * bits_per_item)) {
        words_.assign((bits_ + 63) / 64, 0);
    }

    void insert(std::uint64_t key) {
        std::uint64_t h1 = splitmix64(key);
        std::uint64_t h2 = splitmix64(h1 ^ 0x6a09e667f3bcc909ull) | 1;
        for (unsigned i = 0; i < k_; ++i) set_bit((h1 + i * h2) % bits_);
        ++count_;
    }

    bool may_contain(std::uint64_t key) const {
        std::uint64_t h1 = splitmix64(key);
        std::uint64_t h2 = splitmix64(h1 ^ 0x6a09e667f3bcc909ull) | 1;
        for (unsigned i = 0; i < k_; ++i)
            if (!get_bit((h1 + i * h2) % bits_)) return false;
        return true;
    }

    std::size_t inserted_count() const { return count_; }
    std::size_t bit_count() const { return bits_; }

    // Wire size: used for bandwidth accounting of bloom-summary messages.
    std::size_t byte_size() const { return (bits_ + 7) / 8; }

    // (1 - e^{-k n / m})^k for the current fill.
    double expected_false_positive_rate() const {
        double inner = 1.0 - std::exp(-double(k_) * double(count_) / double(bits_));
        return std::pow(inner, double(k_));
    }

private:
    void set_bit(std::uint64_t i) { words_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
    bool get_bit(std::uint64_t i) const {
        return (words_[i >> 6] >> (i & 63)) & 1;
    }

    unsigned k_;
    std::size_t bits_;
    std::size_t count_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace dhtsim
