#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "tsnorm/error.hpp"
#include "tsnorm/series.hpp"
#include "tsnorm/stats.hpp"

namespace tsnorm {

// The reversible instance-normalization strategies.
//
//   Identity  - location 0, scale 1 (the no-normalization baseline)
//   RevIN     - mean / population std (epsilon inside the square root)
//   R2IN      - median / 1.4826 * MAD
//   R2INPlus  - median / k_emp * MAD, with k_emp = std / MAD per window
//   AIN       - placeholder resolved per dataset by the diagnostics module;
//               it can never be fitted directly.
enum class StrategyKind { Identity, RevIN, R2IN, R2INPlus, AIN };

struct Strategy {
    StrategyKind kind = StrategyKind::RevIN;
    double ain_tau = 0.5; // only meaningful when kind == AIN
};

// Consistency factor making the MAD comparable to the std under normality.
inline constexpr double kGaussianMadFactor = 1.4826;

struct NormConfig {
    double epsilon = 1e-5;     // inside RevIN's square root
    double mad_floor = 1e-8;   // floor on the MAD in the k_emp denominator
    double scale_floor = 1e-8; // floor on MAD-based scales
};

// Per-channel location/scale fitted on one lookback window. The scale already
// bakes in the strategy's factor (1.4826 or k_emp), so normalize/denormalize
// share one code path across strategies.
struct NormStats {
    StrategyKind producing_strategy = StrategyKind::Identity;
    std::vector<double> location;
    std::vector<double> scale;
    std::vector<double> k_used; // 1.4826 for R2IN, window k_emp for R2INPlus, 0 otherwise

    std::size_t channels() const noexcept { return location.size(); }
};

inline const char* strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Identity: return "Identity";
        case StrategyKind::RevIN: return "RevIN";
        case StrategyKind::R2IN: return "R2IN";
        case StrategyKind::R2INPlus: return "R2INPlus";
        case StrategyKind::AIN: return "AIN";
    }
    return "?";
}

inline StrategyKind strategy_from_name(const std::string& name) {
    if (name == "Identity") return StrategyKind::Identity;
    if (name == "RevIN") return StrategyKind::RevIN;
    if (name == "R2IN") return StrategyKind::R2IN;
    if (name == "R2INPlus") return StrategyKind::R2INPlus;
    if (name == "AIN") return StrategyKind::AIN;
    throw Error(Error::Code::Config, "unknown strategy name: " + name);
}

// Fit per-channel statistics on a lookback window. Statistics are always
// fitted on the lookback, never on the target.
inline NormStats fit(const Strategy& strategy, const Matrix& lookback,
                     const NormConfig& config = {}) {
    if (strategy.kind == StrategyKind::AIN) {
        throw Error(Error::Code::StrategyUnresolved,
                    "fit: AIN must be resolved to RevIN or R2INPlus before fitting");
    }
    if (lookback.rows() == 0 || lookback.cols() == 0) {
        throw Error(Error::Code::EmptyInput, "fit: empty lookback");
    }
    if (!lookback.all_finite()) {
        throw Error(Error::Code::NonFiniteInput, "fit: non-finite value in lookback");
    }

    const std::size_t channels = lookback.cols();
    NormStats out;
    out.producing_strategy = strategy.kind;
    out.location.resize(channels);
    out.scale.resize(channels);
    out.k_used.resize(channels);

    for (std::size_t c = 0; c < channels; ++c) {
        const std::vector<double> col = lookback.column(c);
        switch (strategy.kind) {
            case StrategyKind::Identity:
                out.location[c] = 0.0;
                out.scale[c] = 1.0;
                out.k_used[c] = 0.0;
                break;
            case StrategyKind::RevIN:
                out.location[c] = stats::mean(col);
                out.scale[c] = stats::std_population(col, config.epsilon);
                out.k_used[c] = 0.0;
                break;
            case StrategyKind::R2IN: {
                out.location[c] = stats::median(col);
                const double m = stats::mad(col);
                out.scale[c] = std::max(kGaussianMadFactor * m, config.scale_floor);
                out.k_used[c] = kGaussianMadFactor;
                break;
            }
            case StrategyKind::R2INPlus: {
                out.location[c] = stats::median(col);
                const double m = stats::mad(col);
                const double k = stats::empirical_k(col, config.mad_floor);
                out.scale[c] = std::max(k * m, config.scale_floor);
                out.k_used[c] = k;
                break;
            }
            case StrategyKind::AIN:
                break; // unreachable
        }
    }
    return out;
}

namespace detail {
inline void require_channels(const Matrix& m, const NormStats& stats, const char* op) {
    if (m.cols() != stats.channels()) {
        throw Error(Error::Code::ShapeMismatch,
                    std::string(op) + ": matrix has " + std::to_string(m.cols()) +
                        " channels, stats have " + std::to_string(stats.channels()));
    }
}
} // namespace detail

inline Matrix normalize(const Matrix& values, const NormStats& stats) {
    detail::require_channels(values, stats, "normalize");
    Matrix out(values.rows(), values.cols());
    for (std::size_t r = 0; r < values.rows(); ++r) {
        for (std::size_t c = 0; c < values.cols(); ++c) {
            out(r, c) = (values(r, c) - stats.location[c]) / stats.scale[c];
        }
    }
    return out;
}

inline Matrix denormalize(const Matrix& values, const NormStats& stats) {
    detail::require_channels(values, stats, "denormalize");
    Matrix out(values.rows(), values.cols());
    for (std::size_t r = 0; r < values.rows(); ++r) {
        for (std::size_t c = 0; c < values.cols(); ++c) {
            out(r, c) = values(r, c) * stats.scale[c] + stats.location[c];
        }
    }
    return out;
}

} // namespace tsnorm
