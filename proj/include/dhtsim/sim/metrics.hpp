#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dhtsim/sim/wire.hpp"

namespace dhtsim::sim {

// Per-run log: every counted message increments exactly one category.
struct MetricsLog {
    std::uint64_t seed = 0;
    std::array<std::uint64_t, kCategoryCount> bytes_by_category{};
    std::array<std::uint64_t, kCategoryCount> msgs_by_category{};
    std::vector<std::uint32_t> fetch_latency;  // ticks to first item, retries included
    std::vector<std::uint32_t> fetch_probes;
    std::uint64_t fetches_launched = 0;
    std::uint64_t fetch_failures = 0;    // retry budget exhausted on a live key
    std::uint64_t extinct_fetches = 0;   // key had no live replica anywhere
    std::uint64_t cancelled_fetches = 0; // origin node failed mid-fetch
    std::uint64_t loss_events = 0;      // keys extinct at end of run
    std::uint64_t total_payload_bytes = 0;
    std::uint64_t trace_hash = 0;
    std::uint64_t events = 0;

    std::uint64_t bytes(Category c) const {
        return bytes_by_category[static_cast<std::size_t>(c)];
    }
    std::uint64_t messages(Category c) const {
        return msgs_by_category[static_cast<std::size_t>(c)];
    }

    double data_moved_fraction() const {
        if (total_payload_bytes == 0) return 0.0;
        return static_cast<double>(bytes(Category::data_movement)) /
               static_cast<double>(total_payload_bytes);
    }

    double mean_latency() const {
        if (fetch_latency.empty()) return 0.0;
        double s = 0;
        for (auto v : fetch_latency) s += v;
        return s / static_cast<double>(fetch_latency.size());
    }

    double mean_probes() const {
        if (fetch_probes.empty()) return 0.0;
        double s = 0;
        for (auto v : fetch_probes) s += v;
        return s / static_cast<double>(fetch_probes.size());
    }

    friend bool operator==(const MetricsLog&, const MetricsLog&) = default;
};

}  // namespace dhtsim::sim
