#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dhtsim/allocation.hpp"

namespace dhtsim {

// Parameters of the run problem: probability of at least r consecutive
// successes in n Bernoulli(p) trials.
struct RunProblemParams {
    double p = 0.0;
    unsigned r = 1;
    unsigned n = 0;
};

// Probability of a success run of length >= r, computed by expanding the
// generating function F(p,r,s) = p^r s^r (1-ps) / (1 - s + (1-p) p^r s^{r+1})
// through the linear recurrence its denominator induces, then summing the
// coefficients c_r..c_n (Kahan-compensated, extended precision).
double run_probability(const RunProblemParams& params);

// Same quantity via a dynamic program over (trial, current run length).
// Test oracle; independent of the generating-function path.
double run_probability_oracle(const RunProblemParams& params);

// Exhaustive 2^n enumeration, usable for n <= 24.
double run_probability_exhaustive(const RunProblemParams& params);

// FAIL(N,r,S) = 1 - (1 - RUN(p,r,N))^S with p = 1/(2S), or the footnote's
// refined p = (2r+1)/(4rS) when requested.
double fail_probability(unsigned n, unsigned r, unsigned s, bool refined_p = false);

// Smallest S with fail_probability(n, r, S) <= target.  Requires r >= 2:
// for r = 1 the failure probability does not vanish as S grows.
std::optional<unsigned> min_repairs(unsigned n, unsigned r, double target,
                                    bool refined_p = false);

// Expected fetch probes under successor replication: 2S / (2S - 1).
double expected_probes(unsigned s);

// Keyspace length (r + z sqrt(r)) * K / N covering the span of r
// consecutive nodes with the given confidence (z = 1.645 at 95%).
double collision_bound(unsigned r, std::uint64_t ring_size, std::uint64_t n,
                       double confidence = 0.95);

// Monte Carlo check of collision_bound: fraction of sampled r-node spans
// whose length stays below the bound.
double collision_bound_coverage(unsigned r, std::uint64_t ring_size, std::uint64_t n,
                                std::uint64_t trials, std::uint64_t seed,
                                double confidence = 0.95);

// Wilson score interval for a binomial proportion.
struct WilsonInterval {
    double lo = 0.0;
    double hi = 1.0;
};
WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.96);

// Placement reliability model: n uniformly placed nodes, failed_count of
// them marked failed, loss when some key's whole replica set (owner of
// h(m,d), m = 1..r) lands on failed nodes.  Keys are examined one per node
// arc, at the arc's end identifier.
struct PlacementModel {
    std::uint64_t nodes = 500;
    std::uint64_t failed_count = 250;
    AllocationKind kind = AllocationKind::successor;
    unsigned replicas = 8;       // r: owner plus r-1 further locations
    unsigned bits = 32;
    std::uint64_t samples = 100000;
    std::uint64_t seed = 1;
};

struct PlacementLoss {
    std::uint64_t samples = 0;
    std::uint64_t loss_samples = 0;          // samples with any loss
    double loss_probability = 0.0;
    WilsonInterval ci;
    double mean_loss_fraction = 0.0;         // keyspace fraction lost, given loss
    double se_loss_fraction = 0.0;
};

PlacementLoss placement_loss_model(const PlacementModel& model);

// Evaluates several (kind, r) cells over common sample networks, so that
// kinds are compared under identical node placements and failures.
std::vector<PlacementLoss> placement_loss_grid(const PlacementModel& base,
                                               const std::vector<AllocationKind>& kinds,
                                               const std::vector<unsigned>& replica_counts);

}  // namespace dhtsim
