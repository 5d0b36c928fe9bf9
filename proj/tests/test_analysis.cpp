#include <doctest.h>

#include <cmath>

#include "dhtsim/analysis.hpp"

using namespace dhtsim;

TEST_CASE("run probability: closed cases") {
    CHECK(run_probability({0.0, 3, 50}) == 0.0);
    CHECK(run_probability({0.7, 5, 4}) == 0.0);  // run cannot fit
    CHECK(run_probability({1.0, 4, 4}) == doctest::Approx(1.0));
    CHECK(run_probability({1.0, 4, 64}) == doctest::Approx(1.0));
    CHECK(run_probability({0.5, 2, 3}) == doctest::Approx(0.375).epsilon(1e-14));  // SSS SSF FSS
    // r = 1 closed form: 1 - (1-p)^n
    CHECK(run_probability({0.5, 1, 2}) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(run_probability({0.3, 1, 5}) ==
          doctest::Approx(1.0 - std::pow(0.7, 5.0)).epsilon(1e-14));
}

TEST_CASE("run probability equals DP oracle to 1e-12 on the grid") {
    double worst = 0.0;
    for (int pi = 1; pi <= 19; ++pi) {
        double p = 0.05 * pi;
        for (unsigned r = 1; r <= 8; ++r) {
            for (unsigned n = 1; n <= 64; ++n) {
                double a = run_probability({p, r, n});
                double b = run_probability_oracle({p, r, n});
                worst = std::max(worst, std::abs(a - b));
            }
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("run probability equals exhaustive enumeration for n <= 16") {
    double worst = 0.0;
    for (double p : {0.05, 0.3, 0.5, 0.75, 0.95}) {
        for (unsigned r = 1; r <= 6; ++r) {
            for (unsigned n : {1u, 2u, 5u, 9u, 12u, 16u}) {
                double a = run_probability({p, r, n});
                double b = run_probability_exhaustive({p, r, n});
                worst = std::max(worst, std::abs(a - b));
            }
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("run probability monotonicity") {
    // non-decreasing in p and n, non-increasing in r
    for (unsigned n : {8u, 32u, 64u}) {
        double prev = -1.0;
        for (int pi = 1; pi <= 19; ++pi) {
            double v = run_probability({0.05 * pi, 3, n});
            CHECK(v >= prev - 1e-15);
            prev = v;
        }
    }
    for (double p : {0.2, 0.5, 0.8}) {
        double prev = -1.0;
        for (unsigned n = 1; n <= 64; ++n) {
            double v = run_probability({p, 4, n});
            CHECK(v >= prev - 1e-15);
            prev = v;
        }
        prev = 2.0;
        for (unsigned r = 1; r <= 8; ++r) {
            double v = run_probability({p, r, 48});
            CHECK(v <= prev + 1e-15);
            prev = v;
        }
    }
}

TEST_CASE("fail probability") {
    // S = 1 reduces to RUN(1/2, r, N)
    CHECK(fail_probability(64, 4, 1) ==
          doctest::Approx(run_probability({0.5, 4, 64})).epsilon(1e-14));
    CHECK(fail_probability(3, 5, 4) == 0.0);  // N < r
    // monotone decreasing in S at N=500, r=8
    double prev = 1.0;
    for (unsigned s : {4u, 8u, 16u, 32u, 64u}) {
        double v = fail_probability(500, 8, s);
        CHECK(v < prev);
        prev = v;
    }
    // refined footnote fraction (2r+1)/(4rS) is slightly larger than 1/(2S)
    CHECK(fail_probability(500, 8, 8, true) > fail_probability(500, 8, 8, false));
    // identity: FAIL = 1 - (1 - RUN)^S, rebuilt from components
    for (unsigned s : {2u, 4u, 8u}) {
        double run = run_probability({1.0 / (2.0 * s), 6, 200});
        CHECK(fail_probability(200, 6, s) ==
              doctest::Approx(1.0 - std::pow(1.0 - run, double(s))).epsilon(1e-12));
    }
}

TEST_CASE("min repairs reproduces the reliability curves") {
    // huge r: already reliable at S = 1
    CHECK(min_repairs(50, 40, 1e-6).value() == 1);

    // non-increasing in r at N=500, drops at least 10x from r=4 to r=20
    unsigned prev = 0;
    unsigned first = 0, last = 0;
    for (unsigned r = 4; r <= 20; ++r) {
        unsigned s = min_repairs(500, r, 1e-6).value();
        if (r == 4) first = s;
        if (r > 4) CHECK(s <= prev);
        prev = s;
        last = s;
    }
    CHECK(first >= 10 * last);

    // non-decreasing in N at r = 6
    unsigned prev_n = 0;
    for (unsigned n : {50u, 100u, 200u, 500u}) {
        unsigned s = min_repairs(n, 6, 1e-6).value();
        CHECK(s >= prev_n);
        prev_n = s;
    }

    // r = 1 never reaches the target
    CHECK(!min_repairs(500, 1, 1e-6).has_value());
}

TEST_CASE("expected probes formula") {
    CHECK(expected_probes(1) == doctest::Approx(2.0));
    CHECK(expected_probes(4) == doctest::Approx(8.0 / 7.0));
    CHECK(expected_probes(1000) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("collision bound values") {
    CHECK(collision_bound(4, 1024, 64) == doctest::Approx((4 + 1.645 * 2.0) * 16.0));
    CHECK(collision_bound(1, 1024, 64) == doctest::Approx(2.645 * 16.0));
}

TEST_CASE("collision bound Monte Carlo coverage near 95%") {
    for (unsigned r : {4u, 9u, 16u}) {
        double cov = collision_bound_coverage(r, std::uint64_t{1} << 32, 500, 20000, 42);
        CHECK(cov >= 0.92);
        CHECK(cov <= 0.98);
    }
}

TEST_CASE("wilson interval sanity") {
    auto ci = wilson_interval(50, 100);
    CHECK(ci.lo < 0.5);
    CHECK(ci.hi > 0.5);
    CHECK(ci.lo > 0.40);
    CHECK(ci.hi < 0.60);
    auto zero = wilson_interval(0, 100);
    CHECK(zero.lo == 0.0);
    CHECK(zero.hi < 0.05);
}

TEST_CASE("placement model: trivial cases") {
    PlacementModel m;
    m.nodes = 100;
    m.failed_count = 0;
    m.samples = 50;
    m.replicas = 3;
    m.kind = AllocationKind::successor;
    auto none = placement_loss_model(m);
    CHECK(none.loss_probability == 0.0);

    m.failed_count = 50;
    m.replicas = 1;
    auto r1 = placement_loss_model(m);
    CHECK(r1.loss_probability == doctest::Approx(1.0));
    CHECK(r1.mean_loss_fraction == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("placement model orderings at desk scale") {
    PlacementModel base;
    base.nodes = 500;
    base.failed_count = 250;
    base.samples = 3000;
    base.seed = 5;
    auto kinds = std::vector<AllocationKind>{AllocationKind::block, AllocationKind::successor,
                                             AllocationKind::finger, AllocationKind::random};
    auto grid = placement_loss_grid(base, kinds, {12});
    double p_block = grid[0].loss_probability;
    double p_succ = grid[1].loss_probability;
    double p_finger = grid[2].loss_probability;
    double p_random = grid[3].loss_probability;
    CHECK(p_block < p_succ);
    CHECK(p_succ < p_finger);
    CHECK(p_random > p_block);
    // random behaves like finger
    CHECK(std::abs(p_random - p_finger) < 0.05);
}
