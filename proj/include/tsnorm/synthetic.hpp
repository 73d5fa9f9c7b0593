#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tsnorm/error.hpp"
#include "tsnorm/series.hpp"
#include "tsnorm/stats.hpp"

namespace tsnorm {

// Stress scenarios, one per failure mode of instance normalization:
//   OutlierNoise    - smooth seasonal base plus sparse extreme spikes
//   StructuralBreak - level (and optionally variance) shift at a fixed index
//   Skewed          - i.i.d. log-normal draws
//   HeavyTailed     - i.i.d. Student-t draws with low degrees of freedom
enum class ScenarioKind { OutlierNoise, StructuralBreak, Skewed, HeavyTailed };

struct ScenarioParams {
    std::size_t channels = 1;

    // OutlierNoise. Spikes fire with spike_probability per step, but only
    // inside [spike_start_frac, spike_end_frac) of the series. The default
    // zone sits past the training data of a 0.7/0.1/0.2 chronological split
    // (lookback 336, horizon 96), so spikes land in evaluation lookbacks --
    // where they poison window statistics -- while evaluated targets stay
    // clean. Set the fractions to (0, 1) for spikes everywhere.
    double season_period = 48.0;
    double season_amplitude = 1.0;
    double noise_std = 0.3;
    double spike_probability = 0.04;
    double spike_magnitude = 300.0;
    double spike_start_frac = 0.745;
    double spike_end_frac = 0.795;

    // StructuralBreak
    double break_frac = 0.5;
    double level_shift = 4.0;
    double variance_factor = 1.0;

    // Skewed
    double lognormal_sigma = 0.75;

    // HeavyTailed
    double t_dof = 3.0;
};

inline ScenarioKind scenario_from_name(const std::string& name) {
    if (name == "OutlierNoise" || name == "outliernoise") return ScenarioKind::OutlierNoise;
    if (name == "StructuralBreak" || name == "structuralbreak") return ScenarioKind::StructuralBreak;
    if (name == "Skewed" || name == "skewed") return ScenarioKind::Skewed;
    if (name == "HeavyTailed" || name == "heavytailed") return ScenarioKind::HeavyTailed;
    throw Error(Error::Code::Config, "unknown scenario: " + name);
}

inline const char* scenario_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::OutlierNoise: return "OutlierNoise";
        case ScenarioKind::StructuralBreak: return "StructuralBreak";
        case ScenarioKind::Skewed: return "Skewed";
        case ScenarioKind::HeavyTailed: return "HeavyTailed";
    }
    return "?";
}

inline SeriesMatrix generate_contradiction_scenario(ScenarioKind kind, std::uint64_t seed,
                                                    std::size_t length,
                                                    const ScenarioParams& params = {}) {
    if (length == 0 || params.channels == 0) {
        throw Error(Error::Code::InvalidParams, "scenario: length and channels must be >= 1");
    }
    if (params.season_period <= 0.0 || params.noise_std < 0.0 ||
        params.spike_probability < 0.0 || params.spike_probability > 1.0 ||
        params.spike_start_frac < 0.0 || params.spike_end_frac > 1.0 ||
        params.spike_start_frac > params.spike_end_frac) {
        throw Error(Error::Code::InvalidParams, "scenario: bad OutlierNoise parameters");
    }
    if (params.break_frac < 0.0 || params.break_frac > 1.0 || params.variance_factor < 0.0) {
        throw Error(Error::Code::InvalidParams, "scenario: bad StructuralBreak parameters");
    }
    if (params.lognormal_sigma <= 0.0 || params.t_dof <= 0.0) {
        throw Error(Error::Code::InvalidParams, "scenario: bad distribution parameters");
    }

    SeriesMatrix series;
    series.values = Matrix(length, params.channels);
    for (std::size_t c = 0; c < params.channels; ++c) {
        series.channel_names.push_back("ch" + std::to_string(c));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    switch (kind) {
        case ScenarioKind::OutlierNoise: {
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::uniform_real_distribution<double> mag(0.5, 1.5);
            const auto zone_begin =
                static_cast<std::size_t>(params.spike_start_frac * static_cast<double>(length));
            const auto zone_end =
                static_cast<std::size_t>(params.spike_end_frac * static_cast<double>(length));
            for (std::size_t t = 0; t < length; ++t) {
                const double base = params.season_amplitude *
                                    std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                             params.season_period);
                for (std::size_t c = 0; c < params.channels; ++c) {
                    double v = base + params.noise_std * gauss(rng);
                    if (t >= zone_begin && t < zone_end && unit(rng) < params.spike_probability) {
                        v += params.spike_magnitude * mag(rng);
                    }
                    series.values(t, c) = v;
                }
            }
            break;
        }
        case ScenarioKind::StructuralBreak: {
            const auto break_index =
                static_cast<std::size_t>(params.break_frac * static_cast<double>(length));
            for (std::size_t t = 0; t < length; ++t) {
                const bool after = t >= break_index;
                const double scale = after ? std::sqrt(params.variance_factor) : 1.0;
                const double level = after ? params.level_shift : 0.0;
                for (std::size_t c = 0; c < params.channels; ++c) {
                    series.values(t, c) = level + scale * gauss(rng);
                }
            }
            break;
        }
        case ScenarioKind::Skewed: {
            std::lognormal_distribution<double> lognorm(0.0, params.lognormal_sigma);
            for (std::size_t t = 0; t < length; ++t) {
                for (std::size_t c = 0; c < params.channels; ++c) {
                    series.values(t, c) = lognorm(rng);
                }
            }
            break;
        }
        case ScenarioKind::HeavyTailed: {
            std::student_t_distribution<double> student(params.t_dof);
            for (std::size_t t = 0; t < length; ++t) {
                for (std::size_t c = 0; c < params.channels; ++c) {
                    series.values(t, c) = student(rng);
                }
            }
            break;
        }
    }
    return series;
}

// Copy an instance with lookback[position] replaced by
// window mean + magnitude * window std on the designated channels (all
// channels when the list is empty). The target is untouched.
inline Instance inject_outlier(const Instance& instance, std::size_t position, double magnitude,
                               const std::vector<std::size_t>& channels = {}) {
    if (position >= instance.lookback_length()) {
        throw Error(Error::Code::IndexOutOfRange, "inject_outlier: position outside lookback");
    }
    for (std::size_t c : channels) {
        if (c >= instance.channels()) {
            throw Error(Error::Code::IndexOutOfRange, "inject_outlier: channel out of range");
        }
    }
    Instance out = instance;
    std::vector<std::size_t> targets = channels;
    if (targets.empty()) {
        for (std::size_t c = 0; c < instance.channels(); ++c) targets.push_back(c);
    }
    for (std::size_t c : targets) {
        const std::vector<double> col = instance.lookback.column(c);
        const double mu = stats::mean(col);
        const double sd = stats::std_population(col, 0.0);
        out.lookback(position, c) = mu + magnitude * sd;
    }
    return out;
}

} // namespace tsnorm
