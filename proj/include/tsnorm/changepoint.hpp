#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "tsnorm/error.hpp"
#include "tsnorm/stats.hpp"

namespace tsnorm {

enum class SegmentCost {
    L2MeanShift,
};

struct PeltConfig {
    // Per-changepoint penalty. Unset means: derive a robust BIC-style default
    // from the data, see default_pelt_penalty().
    std::optional<double> penalty;
    std::size_t min_segment_length = 2;
    SegmentCost cost_kind = SegmentCost::L2MeanShift;
};

// Breakpoints are the first index of each new segment, strictly increasing,
// all in (0, n). total_cost = sum of segment costs + penalty * #breakpoints.
struct Segmentation {
    std::vector<std::size_t> breakpoints;
    double total_cost = 0.0;
};

// O(1) L2 mean-shift segment cost backed by prefix sums of x and x^2.
class SegmentCostL2 {
public:
    explicit SegmentCostL2(std::span<const double> x)
        : prefix_(x.size() + 1, 0.0), prefix_sq_(x.size() + 1, 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            prefix_[i + 1] = prefix_[i] + x[i];
            prefix_sq_[i + 1] = prefix_sq_[i] + x[i] * x[i];
        }
    }

    std::size_t size() const noexcept { return prefix_.size() - 1; }

    // Sum of squared deviations from the segment mean over [start, end).
    double operator()(std::size_t start, std::size_t end) const {
        const double len = static_cast<double>(end - start);
        const double sum = prefix_[end] - prefix_[start];
        const double sq = prefix_sq_[end] - prefix_sq_[start];
        const double cost = sq - sum * sum / len;
        return cost > 0.0 ? cost : 0.0; // clamp rounding residue
    }

private:
    std::vector<double> prefix_;
    std::vector<double> prefix_sq_;
};

inline double segment_cost_l2(std::span<const double> x, std::size_t start, std::size_t end) {
    if (start >= end || end > x.size()) {
        throw Error(Error::Code::IndexOutOfRange, "segment_cost_l2: bad range");
    }
    return SegmentCostL2(x)(start, end);
}

// Robust BIC-style default penalty: 2 * sigma^2 * log(n), with sigma the
// MAD-based scale of first differences (the 1/sqrt(2) undoes the variance
// doubling of differencing). Falls back to the plain std of differences when
// the MAD degenerates to zero.
inline double default_pelt_penalty(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    std::vector<double> diffs(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) diffs[i] = x[i + 1] - x[i];
    double sigma = 1.4826 * stats::mad(diffs) / std::numbers::sqrt2;
    if (sigma == 0.0) {
        sigma = stats::std_population(diffs, 0.0) / std::numbers::sqrt2;
    }
    return 2.0 * sigma * sigma * std::log(static_cast<double>(n));
}

// Optimal penalized segmentation via PELT. Candidates are pruned only once
// dominance is guaranteed for every future time at which they are still
// admissible: a candidate failing F[s] + C(s,t) <= F[t] is kept until
// t + min_segment_length, which preserves exact optimality under the minimum
// segment length constraint.
inline Segmentation pelt(std::span<const double> x, const PeltConfig& config = {}) {
    const std::size_t n = x.size();
    if (n == 0) {
        throw Error(Error::Code::EmptyInput, "pelt: empty input");
    }
    if (config.min_segment_length < 1) {
        throw Error(Error::Code::InvalidParams, "pelt: min_segment_length must be >= 1");
    }
    stats::detail::require_finite(x, "pelt");

    const std::size_t m = config.min_segment_length;
    const SegmentCostL2 cost(x);
    const double beta = config.penalty ? *config.penalty : default_pelt_penalty(x);
    if (beta < 0.0) {
        throw Error(Error::Code::InvalidParams, "pelt: penalty must be >= 0");
    }

    // No breakpoint is feasible: the whole series is one segment.
    if (n < 2 * m) {
        return {{}, cost(0, n)};
    }

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(n + 1, inf);
    std::vector<std::size_t> prev(n + 1, 0);
    best[0] = -beta;

    struct Candidate {
        std::size_t s;
        std::size_t expire; // first time index at which s is dropped
    };
    std::vector<Candidate> cands;
    cands.push_back({0, std::numeric_limits<std::size_t>::max()});

    for (std::size_t t = m; t <= n; ++t) {
        if (t >= 2 * m) {
            cands.push_back({t - m, std::numeric_limits<std::size_t>::max()});
        }

        double best_val = inf;
        std::size_t best_s = 0;
        for (const auto& c : cands) {
            if (c.expire <= t) continue;
            const double val = best[c.s] + cost(c.s, t) + beta;
            if (val < best_val) {
                best_val = val;
                best_s = c.s;
            }
        }
        best[t] = best_val;
        prev[t] = best_s;

        for (auto& c : cands) {
            if (c.expire <= t) continue;
            if (best[c.s] + cost(c.s, t) > best[t]) {
                c.expire = std::min(c.expire, t + m);
            }
        }
        std::erase_if(cands, [t](const Candidate& c) { return c.expire <= t + 1; });
    }

    Segmentation seg;
    seg.total_cost = best[n];
    std::size_t cur = n;
    while (cur > 0) {
        const std::size_t p = prev[cur];
        if (p == 0) break;
        seg.breakpoints.push_back(p);
        cur = p;
    }
    std::reverse(seg.breakpoints.begin(), seg.breakpoints.end());
    return seg;
}

// Fraction of sliding windows whose final quartile [ceil(3L/4), L) contains a
// detected breakpoint (window-relative indices).
inline double change_point_risk(std::span<const double> series, std::size_t window_length,
                                std::size_t stride, const PeltConfig& config = {}) {
    if (window_length == 0 || stride == 0) {
        throw Error(Error::Code::InvalidParams, "change_point_risk: window_length and stride must be >= 1");
    }
    if (series.size() < window_length) {
        throw Error(Error::Code::InputTooShort, "change_point_risk: series shorter than window");
    }
    const std::size_t quartile_start = (3 * window_length + 3) / 4; // ceil(3L/4)
    std::size_t flagged = 0;
    std::size_t total = 0;
    for (std::size_t w = 0; w + window_length <= series.size(); w += stride) {
        const Segmentation seg = pelt(series.subspan(w, window_length), config);
        ++total;
        for (std::size_t b : seg.breakpoints) {
            if (b >= quartile_start) {
                ++flagged;
                break;
            }
        }
    }
    return static_cast<double>(flagged) / static_cast<double>(total);
}

} // namespace tsnorm
