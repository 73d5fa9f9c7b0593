#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tsnorm/changepoint.hpp"
#include "tsnorm/error.hpp"
#include "tsnorm/normalize.hpp"
#include "tsnorm/series.hpp"
#include "tsnorm/stats.hpp"

namespace tsnorm {

// A dataset's diagnostic summary over sliding windows. Skewness/kurtosis can
// be not-computable when every window has zero variance; the degenerate
// window count is exposed so users can tell why.
struct DataPortrait {
    double avg_k_emp = 0.0;
    std::optional<double> avg_skewness;
    std::optional<double> avg_kurtosis;
    double cpr_rate = 0.0;
    std::size_t windows_profiled = 0;
    std::size_t degenerate_windows = 0;
};

enum class SelectionRuleKind {
    AinOriginal, // high CPR -> RevIN (the counter-intuitive rule)
    AinReversed, // high CPR -> R2INPlus (the ablation's corrected rule)
};

struct SelectionRule {
    SelectionRuleKind kind = SelectionRuleKind::AinOriginal;
    double tau = 0.5;
};

inline const char* selection_rule_name(SelectionRuleKind kind) {
    return kind == SelectionRuleKind::AinOriginal ? "original" : "reversed";
}

// Slide windows of `window_length` across the series (step `stride`) and
// aggregate per-window, per-channel metrics. Aggregation order is fixed for
// reproducibility: per-channel metric -> mean over channels -> mean over
// windows. Channels with zero variance are skipped in the skew/kurtosis
// means; a window where every channel is degenerate is counted in
// degenerate_windows and excluded from those means entirely. k_emp is always
// computable (a constant channel contributes 0) and is averaged over all
// windows, floored windows at their floored value.
inline DataPortrait profile(const SeriesMatrix& series, std::size_t window_length,
                            std::size_t stride, const PeltConfig& pelt_config = {},
                            double mad_floor = 1e-8) {
    if (window_length == 0 || stride == 0) {
        throw Error(Error::Code::InvalidParams, "profile: window_length and stride must be >= 1");
    }
    if (series.length() < window_length) {
        throw Error(Error::Code::InputTooShort, "profile: series shorter than window");
    }

    const std::size_t channels = series.channels();
    DataPortrait p;

    double k_sum = 0.0, skew_sum = 0.0, kurt_sum = 0.0;
    std::size_t skew_windows = 0;

    std::vector<std::vector<double>> columns(channels);
    for (std::size_t c = 0; c < channels; ++c) columns[c] = series.values.column(c);

    for (std::size_t w = 0; w + window_length <= series.length(); w += stride) {
        ++p.windows_profiled;
        double k_chan = 0.0;
        double skew_chan = 0.0, kurt_chan = 0.0;
        std::size_t computable = 0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::span<const double> win(columns[c].data() + w, window_length);
            k_chan += stats::empirical_k(win, mad_floor);
            const auto sk = stats::skewness(win);
            if (sk) {
                skew_chan += *sk;
                kurt_chan += *stats::kurtosis_excess(win);
                ++computable;
            }
        }
        k_sum += k_chan / static_cast<double>(channels);
        if (computable > 0) {
            skew_sum += skew_chan / static_cast<double>(computable);
            kurt_sum += kurt_chan / static_cast<double>(computable);
            ++skew_windows;
        } else {
            ++p.degenerate_windows;
        }
    }

    p.avg_k_emp = k_sum / static_cast<double>(p.windows_profiled);
    if (skew_windows > 0) {
        p.avg_skewness = skew_sum / static_cast<double>(skew_windows);
        p.avg_kurtosis = kurt_sum / static_cast<double>(skew_windows);
    }

    double cpr = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
        cpr += change_point_risk(columns[c], window_length, stride, pelt_config);
    }
    p.cpr_rate = cpr / static_cast<double>(channels);
    return p;
}

// The statically-configured A-IN choice for one dataset. The boundary
// cpr_rate == tau follows the "else" branch of the rule.
inline StrategyKind select_strategy(const DataPortrait& portrait, const SelectionRule& rule) {
    const bool high_risk = portrait.cpr_rate >= rule.tau;
    if (rule.kind == SelectionRuleKind::AinOriginal) {
        return high_risk ? StrategyKind::RevIN : StrategyKind::R2INPlus;
    }
    return high_risk ? StrategyKind::R2INPlus : StrategyKind::RevIN;
}

enum class RecommendationCode {
    VeryHighOutliers,        // k_emp > 1000
    HighStructuralInstability, // CPR >= 0.75
    WellBehaved,
    NoDiagnostics,
};

struct Recommendation {
    std::vector<StrategyKind> strategies;
    RecommendationCode code = RecommendationCode::NoDiagnostics;
    std::string rationale;
};

// The practical decision guide. Thresholds are fixed: k_emp > 1000 flags
// extreme outliers, CPR >= 0.75 flags structural instability, and without a
// portrait the safe default is R2IN.
inline Recommendation recommend(const std::optional<DataPortrait>& portrait) {
    Recommendation r;
    if (!portrait) {
        r.strategies = {StrategyKind::R2IN};
        r.code = RecommendationCode::NoDiagnostics;
        r.rationale = "no diagnostics available; defaulting to the safest baseline";
        return r;
    }
    if (portrait->avg_k_emp > 1000.0) {
        r.strategies = {StrategyKind::R2IN, StrategyKind::R2INPlus};
        r.code = RecommendationCode::VeryHighOutliers;
        r.rationale = "very high outliers (avg k_emp > 1000); robust scaling required";
    } else if (portrait->cpr_rate >= 0.75) {
        r.strategies = {StrategyKind::R2IN};
        r.code = RecommendationCode::HighStructuralInstability;
        r.rationale = "high structural instability (CPR >= 0.75); stable robust choice";
    } else {
        r.strategies = {StrategyKind::RevIN, StrategyKind::R2IN};
        r.code = RecommendationCode::WellBehaved;
        r.rationale = "well-behaved data; evaluate both candidates";
    }
    return r;
}

inline const char* recommendation_code_name(RecommendationCode code) {
    switch (code) {
        case RecommendationCode::VeryHighOutliers: return "very_high_outliers";
        case RecommendationCode::HighStructuralInstability: return "high_structural_instability";
        case RecommendationCode::WellBehaved: return "well_behaved";
        case RecommendationCode::NoDiagnostics: return "no_diagnostics";
    }
    return "?";
}

} // namespace tsnorm
