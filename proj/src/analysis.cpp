#include "dhtsim/analysis.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "dhtsim/rng.hpp"

namespace dhtsim {

namespace {

void check_params(const RunProblemParams& params) {
    if (params.p < 0.0 || params.p > 1.0)
        throw std::invalid_argument("run problem: p outside [0,1]");
    if (params.r < 1) throw std::invalid_argument("run problem: r must be >= 1");
}

}  // namespace

double run_probability(const RunProblemParams& params) {
    check_params(params);
    const unsigned r = params.r;
    const unsigned n = params.n;
    if (n < r) return 0.0;
    const long double p = params.p;
    const long double q = 1.0L - p;
    const long double pr = std::pow(p, static_cast<long double>(r));

    // Denominator 1 - s + q p^r s^{r+1} gives, for i > r+1:
    //   c_i = c_{i-1} - q p^r c_{i-r-1}
    // with c_r = p^r and c_{r+1} = p^r q.
    std::vector<long double> c(n + 1, 0.0L);
    c[r] = pr;
    if (r + 1 <= n) c[r + 1] = pr * q;
    for (unsigned i = r + 2; i <= n; ++i) c[i] = c[i - 1] - q * pr * c[i - r - 1];

    long double sum = 0.0L, comp = 0.0L;  // Kahan
    for (unsigned i = r; i <= n; ++i) {
        long double y = c[i] - comp;
        long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    double out = static_cast<double>(sum);
    return std::clamp(out, 0.0, 1.0);
}

double run_probability_oracle(const RunProblemParams& params) {
    check_params(params);
    const unsigned r = params.r;
    if (params.n < r) return 0.0;
    const long double p = params.p;
    std::vector<long double> state(r, 0.0L);  // mass by current run length 0..r-1
    state[0] = 1.0L;
    long double absorbed = 0.0L;
    for (unsigned trial = 0; trial < params.n; ++trial) {
        std::vector<long double> next(r, 0.0L);
        for (unsigned len = 0; len < r; ++len) {
            long double m = state[len];
            if (m == 0.0L) continue;
            next[0] += m * (1.0L - p);
            if (len + 1 == r)
                absorbed += m * p;
            else
                next[len + 1] += m * p;
        }
        state.swap(next);
    }
    return static_cast<double>(absorbed);
}

double run_probability_exhaustive(const RunProblemParams& params) {
    check_params(params);
    if (params.n > 24) throw std::invalid_argument("exhaustive enumeration limited to n <= 24");
    if (params.n < params.r) return 0.0;
    const long double p = params.p;
    const long double q = 1.0L - p;
    long double total = 0.0L;
    const std::uint32_t top = std::uint32_t{1} << params.n;
    for (std::uint32_t mask = 0; mask < top; ++mask) {
        unsigned best = 0, cur = 0;
        for (unsigned i = 0; i < params.n; ++i) {
            if (mask & (1u << i)) {
                best = std::max(best, ++cur);
            } else {
                cur = 0;
            }
        }
        if (best < params.r) continue;
        unsigned ones = static_cast<unsigned>(__builtin_popcount(mask));
        total += std::pow(p, static_cast<long double>(ones)) *
                 std::pow(q, static_cast<long double>(params.n - ones));
    }
    return static_cast<double>(total);
}

double fail_probability(unsigned n, unsigned r, unsigned s, bool refined_p) {
    if (s < 1) throw std::invalid_argument("fail_probability: S must be >= 1");
    double p = refined_p ? double(2 * r + 1) / double(4.0 * r * s) : 1.0 / (2.0 * s);
    p = std::min(p, 1.0);
    double run = run_probability({p, r, n});
    return 1.0 - std::pow(1.0 - run, static_cast<double>(s));
}

std::optional<unsigned> min_repairs(unsigned n, unsigned r, double target, bool refined_p) {
    if (target <= 0.0 || target >= 1.0)
        throw std::invalid_argument("min_repairs: target must be in (0,1)");
    if (r < 2) return std::nullopt;  // FAIL(N,1,S) tends to a positive constant
    unsigned hi = 1;
    const unsigned cap = 1u << 30;
    while (fail_probability(n, r, hi, refined_p) > target) {
        if (hi >= cap) return std::nullopt;
        hi *= 2;
    }
    unsigned lo = hi / 2 + 1;
    if (hi == 1) return 1;
    while (lo < hi) {
        unsigned mid = lo + (hi - lo) / 2;
        if (fail_probability(n, r, mid, refined_p) <= target)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

double expected_probes(unsigned s) {
    if (s < 1) throw std::invalid_argument("expected_probes: S must be >= 1");
    return 2.0 * s / (2.0 * s - 1.0);
}

double collision_bound(unsigned r, std::uint64_t ring_size, std::uint64_t n, double confidence) {
    if (confidence != 0.95)
        throw std::invalid_argument("collision_bound: only the 95% quantile is tabulated");
    const double z = 1.645;
    return (r + z * std::sqrt(static_cast<double>(r))) * (static_cast<double>(ring_size) / n);
}

double collision_bound_coverage(unsigned r, std::uint64_t ring_size, std::uint64_t n,
                                std::uint64_t trials, std::uint64_t seed, double confidence) {
    const double bound = collision_bound(r, ring_size, n, confidence);
    Rng rng(seed);
    std::vector<std::uint64_t> ids(n);
    std::uint64_t covered = 0, done = 0;
    const std::uint64_t spans_per_ring = std::min<std::uint64_t>(50, n);
    while (done < trials) {
        for (auto& id : ids) id = rng.below(ring_size);
        std::sort(ids.begin(), ids.end());
        for (std::uint64_t t = 0; t < spans_per_ring && done < trials; ++t, ++done) {
            std::uint64_t i = rng.below(n);
            // span covered by r consecutive gaps starting at node i; ring_size
            // is a power of two, so plain wrapping subtraction is exact
            std::uint64_t j = (i + r) % n;
            std::uint64_t span = (ids[j] - ids[i]) & (ring_size - 1);
            if (static_cast<double>(span) < bound) ++covered;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(trials);
}

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    double nd = static_cast<double>(trials);
    double p = static_cast<double>(successes) / nd;
    double z2 = z * z;
    double denom = 1.0 + z2 / nd;
    double center = (p + z2 / (2.0 * nd)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

struct SampleRing {
    std::vector<std::uint64_t> ids;    // sorted
    std::vector<bool> failed;
    std::vector<std::uint32_t> bucket_start;  // owner-lookup acceleration
    unsigned bucket_shift = 0;

    void build(Rng& rng, std::uint64_t nodes, std::uint64_t failed_count, const RingSpace& ring) {
        ids.resize(nodes);
        for (auto& id : ids) id = rng.below(ring.size());
        std::sort(ids.begin(), ids.end());
        failed.assign(nodes, false);
        std::uint64_t marked = 0;
        while (marked < failed_count) {
            std::uint64_t i = rng.below(nodes);
            if (!failed[i]) {
                failed[i] = true;
                ++marked;
            }
        }
        // bucket index by high bits: bucket_start[b] = first node >= b<<shift
        const unsigned kBuckets = 4096;
        bucket_shift = ring.bits() > 12 ? ring.bits() - 12 : 0;
        bucket_start.assign(kBuckets + 1, static_cast<std::uint32_t>(nodes));
        std::size_t node = 0;
        for (unsigned b = 0; b < kBuckets; ++b) {
            std::uint64_t lo = static_cast<std::uint64_t>(b) << bucket_shift;
            while (node < ids.size() && ids[node] < lo) ++node;
            bucket_start[b] = static_cast<std::uint32_t>(node);
        }
    }

    // Index of the first node clockwise at or after x (its owner).
    std::uint32_t owner_index(std::uint64_t x) const {
        std::uint32_t i = bucket_start[x >> bucket_shift];
        while (i < ids.size() && ids[i] < x) ++i;
        return i == ids.size() ? 0 : i;
    }
};

}  // namespace

std::vector<PlacementLoss> placement_loss_grid(const PlacementModel& base,
                                               const std::vector<AllocationKind>& kinds,
                                               const std::vector<unsigned>& replica_counts) {
    const RingSpace ring(base.bits);
    Rng rng(base.seed);
    SampleRing net;

    struct Acc {
        std::uint64_t losses = 0;
        double frac_sum = 0.0;
        double frac_sq = 0.0;
    };
    std::vector<Acc> acc(kinds.size() * replica_counts.size());

    // One config per (kind, r) cell: the replica set of a key is its whole
    // group, so block sizing uses R_MAX = r.
    std::vector<AllocationConfig> cfgs;
    for (auto kind : kinds) {
        for (unsigned r : replica_counts) {
            AllocationConfig cfg;
            cfg.kind = kind;
            cfg.ring = ring;
            cfg.n = base.nodes;
            cfg.r_min = 1;
            cfg.r_max = r;
            cfgs.push_back(cfg);
        }
    }

    for (std::uint64_t s = 0; s < base.samples; ++s) {
        net.build(rng, base.nodes, base.failed_count, ring);
        for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
            for (std::size_t ri = 0; ri < replica_counts.size(); ++ri) {
                const auto& cfg = cfgs[ki * replica_counts.size() + ri];
                unsigned r = replica_counts[ri];
                double lost = 0.0;
                bool any = false;
                std::vector<std::uint32_t> seen;
                for (std::size_t i = 0; i < net.ids.size(); ++i) {
                    std::uint64_t d = net.ids[i];
                    // Replica holders are the first r distinct owners along
                    // h(1,d), h(2,d), ...; colliding indices spill onto later
                    // ones, mirroring the maintenance protocol's collision
                    // handling.
                    seen.clear();
                    bool survives = false;
                    for (unsigned m = 1; seen.size() < r && m <= 8 * r; ++m) {
                        std::uint32_t o = net.owner_index(allocate(cfg, m, d));
                        if (std::find(seen.begin(), seen.end(), o) != seen.end()) continue;
                        seen.push_back(o);
                        if (!net.failed[o]) {
                            survives = true;
                            break;
                        }
                    }
                    if (!survives) {
                        any = true;
                        std::uint64_t prev = i == 0 ? net.ids.back() : net.ids[i - 1];
                        lost += static_cast<double>(ring.distance_cw(prev, d)) /
                                static_cast<double>(ring.size());
                    }
                }
                if (any) {
                    auto& a = acc[ki * replica_counts.size() + ri];
                    ++a.losses;
                    a.frac_sum += lost;
                    a.frac_sq += lost * lost;
                }
            }
        }
    }

    std::vector<PlacementLoss> out;
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        for (std::size_t ri = 0; ri < replica_counts.size(); ++ri) {
            const auto& a = acc[ki * replica_counts.size() + ri];
            PlacementLoss pl;
            pl.samples = base.samples;
            pl.loss_samples = a.losses;
            pl.loss_probability = base.samples ? double(a.losses) / double(base.samples) : 0.0;
            pl.ci = wilson_interval(a.losses, base.samples);
            if (a.losses > 0) {
                pl.mean_loss_fraction = a.frac_sum / double(a.losses);
                if (a.losses > 1) {
                    double var = (a.frac_sq - a.frac_sum * a.frac_sum / double(a.losses)) /
                                 double(a.losses - 1);
                    pl.se_loss_fraction = std::sqrt(std::max(0.0, var) / double(a.losses));
                }
            }
            out.push_back(pl);
        }
    }
    return out;
}

PlacementLoss placement_loss_model(const PlacementModel& model) {
    return placement_loss_grid(model, {model.kind}, {model.replicas}).front();
}

}  // namespace dhtsim
