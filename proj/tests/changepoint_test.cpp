#include "tsnorm/changepoint.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace tsnorm;
using Catch::Approx;

namespace {

// Exhaustive O(T^2) dynamic program over all segmentations, no pruning, with
// segment costs computed by direct summation. Ties resolve exactly like the
// library (ascending previous index, strict improvement), so breakpoint sets
// must match bit for bit.
double direct_cost(const std::vector<double>& x, std::size_t a, std::size_t b) {
    double mu = 0.0;
    for (std::size_t i = a; i < b; ++i) mu += x[i];
    mu /= static_cast<double>(b - a);
    double c = 0.0;
    for (std::size_t i = a; i < b; ++i) c += (x[i] - mu) * (x[i] - mu);
    return c;
}

std::vector<std::size_t> exhaustive_dp(const std::vector<double>& x, double penalty,
                                       std::size_t min_len) {
    const std::size_t n = x.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(n + 1, inf);
    std::vector<std::size_t> prev(n + 1, 0);
    best[0] = -penalty;
    for (std::size_t t = min_len; t <= n; ++t) {
        for (std::size_t s = 0; s + min_len <= t; ++s) {
            if (s != 0 && s < min_len) continue;
            if (best[s] == inf) continue;
            const double val = best[s] + direct_cost(x, s, t) + penalty;
            if (val < best[t]) {
                best[t] = val;
                prev[t] = s;
            }
        }
    }
    std::vector<std::size_t> bkps;
    std::size_t cur = n;
    while (cur > 0 && prev[cur] != 0) {
        bkps.push_back(prev[cur]);
        cur = prev[cur];
    }
    std::reverse(bkps.begin(), bkps.end());
    return bkps;
}

std::vector<double> noise(std::size_t n, unsigned seed, double sd = 1.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d(0.0, sd);
    std::vector<double> out(n);
    for (double& v : out) v = d(rng);
    return out;
}

double recompute_total(const std::vector<double>& x, const Segmentation& seg, double penalty) {
    std::vector<std::size_t> bounds{0};
    bounds.insert(bounds.end(), seg.breakpoints.begin(), seg.breakpoints.end());
    bounds.push_back(x.size());
    double total = penalty * static_cast<double>(seg.breakpoints.size());
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        total += direct_cost(x, bounds[i], bounds[i + 1]);
    }
    return total;
}

} // namespace

TEST_CASE("segment_cost_l2 hand oracles", "[changepoint]") {
    CHECK(segment_cost_l2(std::vector<double>{3, 3, 3, 3}, 0, 4) == Approx(0.0));
    CHECK(segment_cost_l2(std::vector<double>{0, 2}, 0, 2) == Approx(2.0));
    CHECK(segment_cost_l2(std::vector<double>{1, 2, 3, 4}, 0, 4) == Approx(5.0));
    CHECK_THROWS_AS(segment_cost_l2(std::vector<double>{1, 2}, 1, 1), Error);
    CHECK_THROWS_AS(segment_cost_l2(std::vector<double>{1, 2}, 0, 3), Error);

    SECTION("prefix-sum route matches direct summation") {
        const auto x = noise(64, 101);
        SegmentCostL2 cost(x);
        std::mt19937 rng(5);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t a = rng() % 60;
            const std::size_t b = a + 1 + rng() % (64 - a);
            CHECK(cost(a, b) == Approx(direct_cost(x, a, b)).margin(1e-8));
        }
    }
}

TEST_CASE("pelt on constant input finds nothing", "[changepoint]") {
    const std::vector<double> x(80, 2.5);
    const Segmentation seg = pelt(x, {.penalty = 1.0});
    CHECK(seg.breakpoints.empty());
    CHECK(seg.total_cost == Approx(0.0).margin(1e-12));
}

TEST_CASE("pelt finds the single step exactly", "[changepoint]") {
    std::vector<double> x(100, 0.0);
    for (std::size_t i = 50; i < 100; ++i) x[i] = 10.0;
    const double penalty = 2.0 * std::log(100.0); // unit variance estimate
    const Segmentation seg = pelt(x, {.penalty = penalty});
    REQUIRE(seg.breakpoints.size() == 1);
    CHECK(seg.breakpoints[0] == 50);
    CHECK(exhaustive_dp(x, penalty, 2) == seg.breakpoints);
}

TEST_CASE("pelt equals the exhaustive optimum on random series", "[changepoint]") {
    const double penalties[3] = {1.0, 5.0, 15.0};
    std::mt19937 meta(4242);
    for (unsigned seed = 0; seed < 20; ++seed) {
        const std::size_t n = 16 + meta() % 49; // 16..64
        std::vector<double> x = noise(n, 1000 + seed);
        // every third series gets one or two level shifts
        if (seed % 3 == 1) {
            for (std::size_t i = n / 2; i < n; ++i) x[i] += 4.0;
        } else if (seed % 3 == 2) {
            for (std::size_t i = n / 3; i < 2 * n / 3; ++i) x[i] += 3.0;
            for (std::size_t i = 2 * n / 3; i < n; ++i) x[i] -= 3.0;
        }
        for (double penalty : penalties) {
            const Segmentation seg = pelt(x, {.penalty = penalty});
            const auto oracle = exhaustive_dp(x, penalty, 2);
            INFO("seed " << seed << " penalty " << penalty);
            CHECK(seg.breakpoints == oracle);
            CHECK(seg.total_cost == Approx(recompute_total(x, seg, penalty)).epsilon(1e-9));
        }
    }
}

TEST_CASE("pelt respects min_segment_length against the oracle", "[changepoint]") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::vector<double> x = noise(40, 300 + seed);
        for (std::size_t i = 13; i < 27; ++i) x[i] += 5.0;
        for (std::size_t m : {std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
            PeltConfig cfg;
            cfg.penalty = 4.0;
            cfg.min_segment_length = m;
            const Segmentation seg = pelt(x, cfg);
            INFO("seed " << seed << " min_len " << m);
            CHECK(seg.breakpoints == exhaustive_dp(x, 4.0, m));
        }
    }
}

TEST_CASE("iid noise with BIC-style penalty yields at most one spurious breakpoint",
          "[changepoint]") {
    const auto x = noise(200, 9001);
    const Segmentation seg = pelt(x, {}); // default robust penalty
    CHECK(seg.breakpoints.size() <= 1);
    const double penalty = default_pelt_penalty(x);
    CHECK(seg.breakpoints == exhaustive_dp(x, penalty, 2));
}

TEST_CASE("increasing penalty never increases breakpoint count", "[changepoint]") {
    for (unsigned seed = 0; seed < 5; ++seed) {
        std::vector<double> x = noise(120, 50 + seed, 0.8);
        for (std::size_t i = 40; i < 80; ++i) x[i] += 3.0;
        std::size_t last = std::numeric_limits<std::size_t>::max();
        for (double penalty : {0.1, 0.5, 2.0, 8.0, 32.0, 128.0}) {
            const auto count = pelt(x, {.penalty = penalty}).breakpoints.size();
            CHECK(count <= last);
            last = count;
        }
    }
}

TEST_CASE("pelt is invariant under adding a constant", "[changepoint]") {
    std::vector<double> x = noise(150, 31);
    for (std::size_t i = 60; i < 150; ++i) x[i] += 5.0;
    const auto base = pelt(x, {.penalty = 3.0}).breakpoints;
    REQUIRE_FALSE(base.empty());
    std::vector<double> shifted = x;
    for (double& v : shifted) v += 123.75;
    CHECK(pelt(shifted, {.penalty = 3.0}).breakpoints == base);
}

TEST_CASE("too-short input returns an empty segmentation, not a failure", "[changepoint]") {
    PeltConfig cfg;
    cfg.penalty = 1.0;
    cfg.min_segment_length = 4;
    const std::vector<double> x{1.0, 5.0, 2.0, 8.0, 3.0};
    const Segmentation seg = pelt(x, cfg); // n=5 < 2*4
    CHECK(seg.breakpoints.empty());
    CHECK(seg.total_cost == Approx(direct_cost(x, 0, 5)));
    CHECK_THROWS_AS(pelt(std::vector<double>{}, cfg), Error);
}

TEST_CASE("change_point_risk is zero on constant input", "[changepoint]") {
    const std::vector<double> x(400, 1.0);
    CHECK(change_point_risk(x, 100, 10) == 0.0);
}

TEST_CASE("change_point_risk hits 1.0 when every final quartile has a fresh shift",
          "[changepoint]") {
    // Square wave with period 8 and amplitude 10: any 10 consecutive points
    // contain a level flip, so every window's final quartile is flagged.
    std::vector<double> x(400);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = (t / 4) % 2 == 0 ? 0.0 : 10.0;
    CHECK(change_point_risk(x, 40, 1) == Approx(1.0));
}

TEST_CASE("change_point_risk of one mid-series shift matches the geometric count",
          "[changepoint]") {
    const std::size_t T = 300, L = 100, stride = 7, shift_at = 150;
    std::vector<double> x = noise(T, 77, 0.2);
    for (std::size_t i = shift_at; i < T; ++i) x[i] += 20.0;

    const std::size_t quartile_start = (3 * L + 3) / 4;
    std::size_t expected_flagged = 0, total = 0;
    for (std::size_t w = 0; w + L <= T; w += stride) {
        ++total;
        if (shift_at >= w) {
            const std::size_t rel = shift_at - w;
            if (rel >= quartile_start && rel < L) ++expected_flagged;
        }
    }
    REQUIRE(expected_flagged > 0);
    CHECK(change_point_risk(x, L, stride) ==
          Approx(static_cast<double>(expected_flagged) / static_cast<double>(total)));

    SECTION("CPR stays within [0, 1]") {
        for (unsigned seed = 0; seed < 5; ++seed) {
            const auto y = noise(240, seed);
            const double cpr = change_point_risk(y, 60, 20);
            CHECK(cpr >= 0.0);
            CHECK(cpr <= 1.0);
        }
    }
}
