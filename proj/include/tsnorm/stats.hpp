#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tsnorm/error.hpp"

namespace tsnorm::stats {

// Scalar statistics shared by every other module. All moments use the
// population (1/n) divisor, and MAD is returned unscaled; consistency
// factors such as 1.4826 belong to the callers.

namespace detail {

inline void require_non_empty(std::span<const double> x, const char* op) {
    if (x.empty()) {
        throw Error(Error::Code::EmptyInput, std::string(op) + ": empty input");
    }
}

inline void require_finite(std::span<const double> x, const char* op) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw Error(Error::Code::NonFiniteInput,
                        std::string(op) + ": non-finite value in input");
        }
    }
}

// Median of a scratch buffer, destroying its order. nth_element keeps the
// common case O(n).
inline double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double med = v[mid];
    if (n % 2 == 0) {
        const double lower =
            *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }
    return med;
}

} // namespace detail

inline double mean(std::span<const double> x) {
    detail::require_non_empty(x, "mean");
    detail::require_finite(x, "mean");
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

// sqrt((1/n) * sum (x - mean)^2 + epsilon); epsilon sits inside the root so
// the result is strictly positive whenever epsilon > 0.
inline double std_population(std::span<const double> x, double epsilon) {
    detail::require_non_empty(x, "std_population");
    detail::require_finite(x, "std_population");
    const double mu = mean(x);
    double acc = 0.0;
    for (double v : x) {
        const double d = v - mu;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.size()) + epsilon);
}

inline double median(std::span<const double> x) {
    detail::require_non_empty(x, "median");
    detail::require_finite(x, "median");
    std::vector<double> tmp(x.begin(), x.end());
    return detail::median_inplace(tmp);
}

// Median absolute deviation from the median, unscaled.
inline double mad(std::span<const double> x) {
    detail::require_non_empty(x, "mad");
    detail::require_finite(x, "mad");
    std::vector<double> tmp(x.begin(), x.end());
    const double med = detail::median_inplace(tmp);
    for (double& v : tmp) v = std::fabs(v - med);
    return detail::median_inplace(tmp);
}

// Third standardized moment m3 / m2^(3/2) (uncorrected Fisher-Pearson).
// Returns nullopt on zero population variance instead of propagating NaN.
inline std::optional<double> skewness(std::span<const double> x) {
    detail::require_non_empty(x, "skewness");
    detail::require_finite(x, "skewness");
    const double mu = mean(x);
    double m2 = 0.0, m3 = 0.0;
    for (double v : x) {
        const double d = v - mu;
        m2 += d * d;
        m3 += d * d * d;
    }
    const double n = static_cast<double>(x.size());
    m2 /= n;
    m3 /= n;
    if (m2 <= 0.0) return std::nullopt;
    return m3 / (m2 * std::sqrt(m2));
}

// Excess kurtosis m4 / m2^2 - 3, population moments.
inline std::optional<double> kurtosis_excess(std::span<const double> x) {
    detail::require_non_empty(x, "kurtosis_excess");
    detail::require_finite(x, "kurtosis_excess");
    const double mu = mean(x);
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mu;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    const double n = static_cast<double>(x.size());
    m2 /= n;
    m4 /= n;
    if (m2 <= 0.0) return std::nullopt;
    return m4 / (m2 * m2) - 3.0;
}

// std / MAD ratio. The floor keeps windows with MAD = 0 finite (they show up
// as very large ratios rather than a division by zero).
inline double empirical_k(std::span<const double> x, double mad_floor) {
    detail::require_non_empty(x, "empirical_k");
    const double s = std_population(x, 0.0);
    const double m = std::max(mad(x), mad_floor);
    return s / m;
}

} // namespace tsnorm::stats
