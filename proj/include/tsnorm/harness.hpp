#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsnorm/changepoint.hpp"
#include "tsnorm/csv.hpp"
#include "tsnorm/diagnostics.hpp"
#include "tsnorm/error.hpp"
#include "tsnorm/model.hpp"
#include "tsnorm/normalize.hpp"
#include "tsnorm/series.hpp"
#include "tsnorm/synthetic.hpp"

namespace tsnorm {

// ---------------------------------------------------------------------------
// Windowing and chronological splits
// ---------------------------------------------------------------------------

// Cut instances at starts 0, stride, 2*stride, ...; lookback [s, s+L) and
// target [s+L, s+L+H). Count = floor((T-L-H)/stride) + 1.
inline std::vector<Instance> windowize(const SeriesMatrix& series, std::size_t lookback,
                                       std::size_t horizon, std::size_t stride,
                                       const std::string& dataset_id = "") {
    if (lookback == 0 || horizon == 0 || stride == 0) {
        throw Error(Error::Code::InvalidParams, "windowize: lookback, horizon, stride must be >= 1");
    }
    const std::size_t T = series.length();
    if (T < lookback + horizon) {
        throw Error(Error::Code::InputTooShort, "windowize: series shorter than lookback + horizon");
    }
    const std::size_t C = series.channels();
    std::vector<Instance> out;
    for (std::size_t s = 0; s + lookback + horizon <= T; s += stride) {
        Instance inst;
        inst.dataset_id = dataset_id;
        inst.window_index = s;
        inst.lookback = Matrix(lookback, C);
        inst.target = Matrix(horizon, C);
        for (std::size_t r = 0; r < lookback; ++r) {
            for (std::size_t c = 0; c < C; ++c) inst.lookback(r, c) = series.values(s + r, c);
        }
        for (std::size_t r = 0; r < horizon; ++r) {
            for (std::size_t c = 0; c < C; ++c) inst.target(r, c) = series.values(s + lookback + r, c);
        }
        out.push_back(std::move(inst));
    }
    return out;
}

struct SplitInstances {
    std::vector<Instance> train;
    std::vector<Instance> val;
    std::vector<Instance> test;
};

// Chronological split of the instance list by window start: the first
// train_frac of instances go to train, the next val_frac to val, the rest to
// test, so start indices never interleave across splits.
inline SplitInstances split_chronological(std::vector<Instance> instances, double train_frac,
                                          double val_frac) {
    if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
        throw Error(Error::Code::InvalidParams, "split_chronological: bad fractions");
    }
    const std::size_t n = instances.size();
    const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * train_frac);
    const auto n_val = static_cast<std::size_t>(static_cast<double>(n) * val_frac);
    if (n_train == 0 || n_train + n_val >= n) {
        throw Error(Error::Code::EmptyDataset, "split_chronological: empty train or test split");
    }
    SplitInstances out;
    out.train.assign(std::make_move_iterator(instances.begin()),
                     std::make_move_iterator(instances.begin() + static_cast<std::ptrdiff_t>(n_train)));
    out.val.assign(std::make_move_iterator(instances.begin() + static_cast<std::ptrdiff_t>(n_train)),
                   std::make_move_iterator(instances.begin() + static_cast<std::ptrdiff_t>(n_train + n_val)));
    out.test.assign(std::make_move_iterator(instances.begin() + static_cast<std::ptrdiff_t>(n_train + n_val)),
                    std::make_move_iterator(instances.end()));
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Normalize with per-instance lookback statistics, forecast, denormalize.
inline Matrix forecast_original_scale(const LinearForecaster& model, const Strategy& strategy,
                                      const Instance& instance, const NormConfig& norm_config) {
    const NormStats s = fit(strategy, instance.lookback, norm_config);
    return denormalize(forward(model, normalize(instance.lookback, s)), s);
}

struct EvalMetrics {
    double mse = 0.0;
    double mae = 0.0;
};

// Original-scale MSE/MAE, averaged over all elements (instances x H x C).
inline EvalMetrics evaluate(const LinearForecaster& model, const Strategy& strategy,
                            std::span<const Instance> test_instances,
                            const NormConfig& norm_config) {
    if (test_instances.empty()) {
        throw Error(Error::Code::EmptyDataset, "evaluate: empty test set");
    }
    double se = 0.0, ae = 0.0;
    std::size_t count = 0;
    for (const Instance& inst : test_instances) {
        const Matrix yhat = forecast_original_scale(model, strategy, inst, norm_config);
        if (yhat.rows() != inst.target.rows() || yhat.cols() != inst.target.cols()) {
            throw Error(Error::Code::ShapeMismatch, "evaluate: model horizon does not match target");
        }
        for (std::size_t h = 0; h < yhat.rows(); ++h) {
            for (std::size_t c = 0; c < yhat.cols(); ++c) {
                const double err = yhat(h, c) - inst.target(h, c);
                se += err * err;
                ae += std::fabs(err);
                ++count;
            }
        }
    }
    return {se / static_cast<double>(count), ae / static_cast<double>(count)};
}

// ---------------------------------------------------------------------------
// Rank aggregation
// ---------------------------------------------------------------------------

struct CellResult {
    std::string dataset;
    std::string strategy;     // label as configured (AIN stays "AIN")
    StrategyKind resolved;    // what actually ran
    std::size_t horizon = 0;
    double mse = 0.0;
    double mae = 0.0;
    NormStats sample_stats;   // first test window's stats, kept for audit
};

struct RankTable {
    std::map<std::string, double> overall; // over all (dataset, horizon, metric) cells
    std::map<std::string, double> by_mse;
    std::map<std::string, double> by_mae;
};

namespace detail {

// Ascending ranks with ties sharing the mean rank.
inline std::vector<double> mean_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

// Within each (dataset, horizon, metric) cell, rank strategies by the metric
// ascending (ties share the mean rank) and average over all cells. Every cell
// must contain every strategy.
inline RankTable average_rank(std::span<const CellResult> rows) {
    std::set<std::string> strategies;
    for (const auto& r : rows) strategies.insert(r.strategy);
    if (strategies.empty()) {
        throw Error(Error::Code::EmptyDataset, "average_rank: no rows");
    }

    std::map<std::pair<std::string, std::size_t>, std::vector<const CellResult*>> cells;
    for (const auto& r : rows) cells[{r.dataset, r.horizon}].push_back(&r);

    std::map<std::string, double> sum_overall, sum_mse, sum_mae;
    std::size_t n_cells = 0;
    for (const auto& [key, cell] : cells) {
        if (cell.size() != strategies.size()) {
            throw Error(Error::Code::IncompleteGrid,
                        "average_rank: dataset " + key.first + " horizon " +
                            std::to_string(key.second) + " is missing strategies");
        }
        ++n_cells;
        for (int metric = 0; metric < 2; ++metric) {
            std::vector<double> values;
            for (const CellResult* r : cell) values.push_back(metric == 0 ? r->mse : r->mae);
            const std::vector<double> ranks = detail::mean_ranks(values);
            for (std::size_t i = 0; i < cell.size(); ++i) {
                sum_overall[cell[i]->strategy] += ranks[i];
                (metric == 0 ? sum_mse : sum_mae)[cell[i]->strategy] += ranks[i];
            }
        }
    }

    RankTable table;
    for (const auto& [name, total] : sum_overall) {
        table.overall[name] = total / static_cast<double>(2 * n_cells);
    }
    for (const auto& [name, total] : sum_mse) {
        table.by_mse[name] = total / static_cast<double>(n_cells);
    }
    for (const auto& [name, total] : sum_mae) {
        table.by_mae[name] = total / static_cast<double>(n_cells);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct DatasetSpec {
    std::string name;
    std::string path;                      // CSV input, or
    std::optional<ScenarioKind> scenario;  // synthetic generator
    std::uint64_t seed = 1;
    std::size_t length = 6000;
    ScenarioParams params;
};

struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    std::size_t lookback = 336;
    std::vector<std::size_t> horizons = {96, 192, 336, 720};
    double train_frac = 0.7;
    double val_frac = 0.1;
    double test_frac = 0.2;
    std::vector<StrategyKind> strategies = {StrategyKind::Identity, StrategyKind::RevIN,
                                            StrategyKind::R2IN, StrategyKind::R2INPlus};
    NormConfig norm;
    PeltConfig pelt;
    SelectionRule rule;
    TrainConfig train;
    std::size_t stride = 1;
    std::size_t profile_stride = 1;
    std::uint64_t seed = 42;
    std::string output_dir;
    bool save_training_logs = false;
    bool save_checkpoints = false;
};

// Default output directory: $TSNORM_OUTPUT_DIR when set, else ./tsnorm_out.
inline std::string default_output_dir() {
    if (const char* env = std::getenv("TSNORM_OUTPUT_DIR")) {
        if (*env != '\0') return env;
    }
    return "tsnorm_out";
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) {
            throw Error(Error::Code::Config, "unknown key \"" + key + "\" in " + where);
        }
    }
}

inline ScenarioParams scenario_params_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"channels", "season_period", "season_amplitude", "noise_std",
                         "spike_probability", "spike_magnitude", "spike_start_frac",
                         "spike_end_frac", "break_frac", "level_shift", "variance_factor",
                         "lognormal_sigma", "t_dof"},
                        "dataset params");
    ScenarioParams p;
    p.channels = j.value("channels", p.channels);
    p.season_period = j.value("season_period", p.season_period);
    p.season_amplitude = j.value("season_amplitude", p.season_amplitude);
    p.noise_std = j.value("noise_std", p.noise_std);
    p.spike_probability = j.value("spike_probability", p.spike_probability);
    p.spike_magnitude = j.value("spike_magnitude", p.spike_magnitude);
    p.spike_start_frac = j.value("spike_start_frac", p.spike_start_frac);
    p.spike_end_frac = j.value("spike_end_frac", p.spike_end_frac);
    p.break_frac = j.value("break_frac", p.break_frac);
    p.level_shift = j.value("level_shift", p.level_shift);
    p.variance_factor = j.value("variance_factor", p.variance_factor);
    p.lognormal_sigma = j.value("lognormal_sigma", p.lognormal_sigma);
    p.t_dof = j.value("t_dof", p.t_dof);
    return p;
}

} // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j,
        {"datasets", "lookback", "horizons", "split", "strategies", "normalization", "pelt",
         "selection_rule", "train", "stride", "profile_stride", "seed", "output_dir",
         "save_training_logs", "save_checkpoints"},
        "config");

    ExperimentConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.lookback = j.value("lookback", cfg.lookback);
    cfg.stride = j.value("stride", cfg.stride);
    cfg.profile_stride = j.value("profile_stride", cfg.profile_stride);
    cfg.output_dir = j.value("output_dir", std::string());
    cfg.save_training_logs = j.value("save_training_logs", false);
    cfg.save_checkpoints = j.value("save_checkpoints", false);

    if (j.contains("horizons")) {
        cfg.horizons = j.at("horizons").get<std::vector<std::size_t>>();
    }
    for (std::size_t h : cfg.horizons) {
        if (h == 0) throw Error(Error::Code::Config, "horizons must be >= 1");
    }
    if (cfg.lookback == 0) throw Error(Error::Code::Config, "lookback must be >= 1");

    if (j.contains("split")) {
        const auto& s = j.at("split");
        detail::reject_unknown_keys(s, {"train", "val", "test"}, "split");
        cfg.train_frac = s.value("train", cfg.train_frac);
        cfg.val_frac = s.value("val", cfg.val_frac);
        cfg.test_frac = s.value("test", cfg.test_frac);
    }
    if (std::fabs(cfg.train_frac + cfg.val_frac + cfg.test_frac - 1.0) > 1e-9) {
        throw Error(Error::Code::Config, "split fractions must sum to 1");
    }

    if (j.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& name : j.at("strategies")) {
            cfg.strategies.push_back(strategy_from_name(name.get<std::string>()));
        }
    }
    if (cfg.strategies.empty()) {
        throw Error(Error::Code::Config, "strategies must be non-empty");
    }

    if (j.contains("normalization")) {
        const auto& n = j.at("normalization");
        detail::reject_unknown_keys(n, {"epsilon", "mad_floor", "scale_floor"}, "normalization");
        cfg.norm.epsilon = n.value("epsilon", cfg.norm.epsilon);
        cfg.norm.mad_floor = n.value("mad_floor", cfg.norm.mad_floor);
        cfg.norm.scale_floor = n.value("scale_floor", cfg.norm.scale_floor);
    }
    if (cfg.norm.epsilon <= 0.0 || cfg.norm.mad_floor <= 0.0 || cfg.norm.scale_floor <= 0.0) {
        throw Error(Error::Code::Config, "normalization floors must be > 0");
    }

    if (j.contains("pelt")) {
        const auto& p = j.at("pelt");
        detail::reject_unknown_keys(p, {"penalty", "min_segment_length"}, "pelt");
        if (p.contains("penalty") && !p.at("penalty").is_null()) {
            cfg.pelt.penalty = p.at("penalty").get<double>();
            if (*cfg.pelt.penalty < 0.0) throw Error(Error::Code::Config, "pelt penalty must be >= 0");
        }
        cfg.pelt.min_segment_length = p.value("min_segment_length", cfg.pelt.min_segment_length);
        if (cfg.pelt.min_segment_length < 1) {
            throw Error(Error::Code::Config, "pelt min_segment_length must be >= 1");
        }
    }

    if (j.contains("selection_rule")) {
        const auto& r = j.at("selection_rule");
        detail::reject_unknown_keys(r, {"kind", "tau"}, "selection_rule");
        const std::string kind = r.value("kind", "original");
        if (kind == "original") {
            cfg.rule.kind = SelectionRuleKind::AinOriginal;
        } else if (kind == "reversed") {
            cfg.rule.kind = SelectionRuleKind::AinReversed;
        } else {
            throw Error(Error::Code::Config, "selection_rule.kind must be original or reversed");
        }
        cfg.rule.tau = r.value("tau", cfg.rule.tau);
        if (cfg.rule.tau <= 0.0 || cfg.rule.tau >= 1.0) {
            throw Error(Error::Code::Config, "selection_rule.tau must be in (0,1)");
        }
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown_keys(t,
                                    {"learning_rate", "epochs", "batch_size", "early_stop_patience",
                                     "val_fraction", "optimizer", "adam_beta1", "adam_beta2",
                                     "adam_epsilon", "kernel_size", "channel_mode"},
                                    "train");
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.early_stop_patience = t.value("early_stop_patience", cfg.train.early_stop_patience);
        cfg.train.val_fraction = t.value("val_fraction", cfg.train.val_fraction);
        const std::string opt = t.value("optimizer", "adam");
        if (opt == "adam") {
            cfg.train.optimizer = OptimizerKind::Adam;
        } else if (opt == "sgd") {
            cfg.train.optimizer = OptimizerKind::SGD;
        } else {
            throw Error(Error::Code::Config, "train.optimizer must be adam or sgd");
        }
        cfg.train.adam_beta1 = t.value("adam_beta1", cfg.train.adam_beta1);
        cfg.train.adam_beta2 = t.value("adam_beta2", cfg.train.adam_beta2);
        cfg.train.adam_epsilon = t.value("adam_epsilon", cfg.train.adam_epsilon);
        cfg.train.kernel_size = t.value("kernel_size", cfg.train.kernel_size);
        const std::string mode = t.value("channel_mode", "shared");
        if (mode == "shared") {
            cfg.train.channel_mode = ChannelMode::SharedAcrossChannels;
        } else if (mode == "per_channel") {
            cfg.train.channel_mode = ChannelMode::PerChannel;
        } else {
            throw Error(Error::Code::Config, "train.channel_mode must be shared or per_channel");
        }
        if (cfg.train.learning_rate <= 0.0 || cfg.train.epochs < 1 || cfg.train.batch_size < 1 ||
            cfg.train.early_stop_patience < 0 || cfg.train.kernel_size < 1 ||
            cfg.train.kernel_size % 2 == 0) {
            throw Error(Error::Code::Config, "bad train settings");
        }
    }
    cfg.train.seed = cfg.seed;

    if (!j.contains("datasets") || !j.at("datasets").is_array() || j.at("datasets").empty()) {
        throw Error(Error::Code::Config, "config needs a non-empty datasets array");
    }
    for (const auto& d : j.at("datasets")) {
        detail::reject_unknown_keys(d, {"name", "path", "scenario", "seed", "length", "params"},
                                    "dataset");
        DatasetSpec spec;
        spec.name = d.value("name", std::string());
        if (spec.name.empty()) throw Error(Error::Code::Config, "dataset needs a name");
        spec.seed = d.value("seed", cfg.seed);
        spec.length = d.value("length", spec.length);
        if (d.contains("path") == d.contains("scenario")) {
            throw Error(Error::Code::Config,
                        "dataset \"" + spec.name + "\" needs exactly one of path or scenario");
        }
        if (d.contains("path")) {
            spec.path = d.at("path").get<std::string>();
        } else {
            spec.scenario = scenario_from_name(d.at("scenario").get<std::string>());
        }
        if (d.contains("params")) {
            spec.params = detail::scenario_params_from_json(d.at("params"));
        }
        cfg.datasets.push_back(std::move(spec));
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Error::Code::Config, "cannot open config: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Error::Code::Config, "bad config JSON: " + std::string(e.what()));
    }
    return experiment_config_from_json(j);
}

inline SeriesMatrix load_dataset(const DatasetSpec& spec) {
    if (spec.scenario) {
        return generate_contradiction_scenario(*spec.scenario, spec.seed, spec.length, spec.params);
    }
    return load_csv(spec.path);
}

// ---------------------------------------------------------------------------
// Benchmark pipeline
// ---------------------------------------------------------------------------

struct CellError {
    std::string dataset;
    std::string strategy;
    std::size_t horizon = 0;
    std::string message;
};

struct EvalReport {
    std::vector<CellResult> cells;
    std::vector<CellError> errors;
    RankTable ranks;                              // over complete cells only
    std::map<std::string, DataPortrait> portraits;
    std::map<std::string, std::string> ain_choice; // dataset -> resolved strategy
};

// Phase 1: profile every dataset. Phases 2/3: for each (dataset, strategy,
// horizon) resolve A-IN, windowize, split chronologically, train, evaluate.
// Failures are recorded per cell, never fatal for the sweep.
inline EvalReport run_benchmark(const ExperimentConfig& cfg) {
    EvalReport report;

    for (const DatasetSpec& spec : cfg.datasets) {
        SeriesMatrix series;
        try {
            series = load_dataset(spec);
        } catch (const Error& e) {
            for (StrategyKind s : cfg.strategies) {
                for (std::size_t h : cfg.horizons) {
                    report.errors.push_back({spec.name, strategy_name(s), h, e.what()});
                }
            }
            continue;
        }

        DataPortrait portrait;
        bool have_portrait = false;
        try {
            portrait = profile(series, cfg.lookback, cfg.profile_stride, cfg.pelt,
                               cfg.norm.mad_floor);
            have_portrait = true;
            report.portraits[spec.name] = portrait;
        } catch (const Error&) {
            // too short to profile; A-IN cannot resolve below
        }

        StrategyKind ain_resolved = StrategyKind::R2INPlus;
        if (have_portrait) {
            ain_resolved = select_strategy(portrait, cfg.rule);
        }

        const bool runs_ain =
            std::find(cfg.strategies.begin(), cfg.strategies.end(), StrategyKind::AIN) !=
            cfg.strategies.end();
        if (runs_ain && have_portrait) {
            report.ain_choice[spec.name] = strategy_name(ain_resolved);
        }

        for (StrategyKind label : cfg.strategies) {
            for (std::size_t horizon : cfg.horizons) {
                const std::string label_name = strategy_name(label);
                try {
                    if (label == StrategyKind::AIN && !have_portrait) {
                        throw Error(Error::Code::StrategyUnresolved,
                                    "A-IN cannot resolve: dataset too short to profile");
                    }
                    const StrategyKind resolved =
                        label == StrategyKind::AIN ? ain_resolved : label;
                    const Strategy strategy{resolved};

                    SplitInstances split = split_chronological(
                        windowize(series, cfg.lookback, horizon, cfg.stride, spec.name),
                        cfg.train_frac, cfg.val_frac);

                    TrainResult trained =
                        train(split.train, split.val, strategy, cfg.norm, cfg.train);
                    const EvalMetrics metrics =
                        evaluate(trained.model, strategy, split.test, cfg.norm);

                    CellResult cell;
                    cell.dataset = spec.name;
                    cell.strategy = label_name;
                    cell.resolved = resolved;
                    cell.horizon = horizon;
                    cell.mse = metrics.mse;
                    cell.mae = metrics.mae;
                    cell.sample_stats = fit(strategy, split.test.front().lookback, cfg.norm);
                    report.cells.push_back(std::move(cell));

                    if ((cfg.save_training_logs || cfg.save_checkpoints) && !cfg.output_dir.empty()) {
                        std::filesystem::create_directories(cfg.output_dir);
                        const std::string stem = cfg.output_dir + "/" + spec.name + "_" +
                                                 label_name + "_" + std::to_string(horizon);
                        if (cfg.save_training_logs) trained.log.save_jsonl(stem + "_train.jsonl");
                        if (cfg.save_checkpoints) save_checkpoint(trained.model, stem + ".json");
                    }
                } catch (const Error& e) {
                    report.errors.push_back({spec.name, label_name, horizon, e.what()});
                }
            }
        }
    }

    // Rank only over cells where every strategy succeeded.
    std::set<std::string> labels;
    for (StrategyKind s : cfg.strategies) labels.insert(strategy_name(s));
    std::map<std::pair<std::string, std::size_t>, std::size_t> counts;
    for (const auto& c : report.cells) ++counts[{c.dataset, c.horizon}];
    std::vector<CellResult> complete;
    for (const auto& c : report.cells) {
        if (counts[{c.dataset, c.horizon}] == labels.size()) complete.push_back(c);
    }
    if (!complete.empty()) {
        report.ranks = average_rank(complete);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline nlohmann::json norm_stats_to_json(const NormStats& s) {
    return {{"producing_strategy", strategy_name(s.producing_strategy)},
            {"location", s.location},
            {"scale", s.scale},
            {"k_used", s.k_used}};
}

inline nlohmann::json portrait_to_json(const DataPortrait& p) {
    nlohmann::json j{{"avg_k_emp", p.avg_k_emp},
                     {"cpr_rate", p.cpr_rate},
                     {"windows_profiled", p.windows_profiled},
                     {"degenerate_windows", p.degenerate_windows}};
    j["avg_skewness"] = p.avg_skewness ? nlohmann::json(*p.avg_skewness) : nlohmann::json();
    j["avg_kurtosis"] = p.avg_kurtosis ? nlohmann::json(*p.avg_kurtosis) : nlohmann::json();
    return j;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["lookback"] = cfg.lookback;
    j["horizons"] = cfg.horizons;
    j["split"] = {{"train", cfg.train_frac}, {"val", cfg.val_frac}, {"test", cfg.test_frac}};
    j["stride"] = cfg.stride;
    j["profile_stride"] = cfg.profile_stride;
    j["seed"] = cfg.seed;
    std::vector<std::string> strategies;
    for (StrategyKind s : cfg.strategies) strategies.emplace_back(strategy_name(s));
    j["strategies"] = strategies;
    j["normalization"] = {{"epsilon", cfg.norm.epsilon},
                          {"mad_floor", cfg.norm.mad_floor},
                          {"scale_floor", cfg.norm.scale_floor}};
    j["pelt"] = {{"penalty", cfg.pelt.penalty ? nlohmann::json(*cfg.pelt.penalty) : nlohmann::json()},
                 {"min_segment_length", cfg.pelt.min_segment_length}};
    j["selection_rule"] = {{"kind", selection_rule_name(cfg.rule.kind)}, {"tau", cfg.rule.tau}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"early_stop_patience", cfg.train.early_stop_patience},
                  {"val_fraction", cfg.train.val_fraction},
                  {"optimizer", cfg.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                  {"adam_beta1", cfg.train.adam_beta1},
                  {"adam_beta2", cfg.train.adam_beta2},
                  {"adam_epsilon", cfg.train.adam_epsilon},
                  {"kernel_size", cfg.train.kernel_size},
                  {"channel_mode",
                   cfg.train.channel_mode == ChannelMode::PerChannel ? "per_channel" : "shared"}};
    j["datasets"] = nlohmann::json::array();
    for (const auto& d : cfg.datasets) {
        nlohmann::json dj{{"name", d.name}};
        if (d.scenario) {
            dj["scenario"] = scenario_name(*d.scenario);
            dj["seed"] = d.seed;
            dj["length"] = d.length;
        } else {
            dj["path"] = d.path;
        }
        j["datasets"].push_back(dj);
    }
    return j;
}

inline nlohmann::json report_to_json(const EvalReport& report, const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["config"] = experiment_config_to_json(cfg);
    j["portraits"] = nlohmann::json::object();
    for (const auto& [name, p] : report.portraits) j["portraits"][name] = portrait_to_json(p);
    j["ain_choice"] = report.ain_choice;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : report.cells) {
        j["cells"].push_back({{"dataset", c.dataset},
                              {"strategy", c.strategy},
                              {"resolved", strategy_name(c.resolved)},
                              {"horizon", c.horizon},
                              {"mse", c.mse},
                              {"mae", c.mae},
                              {"sample_norm_stats", norm_stats_to_json(c.sample_stats)}});
    }
    j["errors"] = nlohmann::json::array();
    for (const auto& e : report.errors) {
        j["errors"].push_back({{"dataset", e.dataset},
                               {"strategy", e.strategy},
                               {"horizon", e.horizon},
                               {"message", e.message}});
    }
    j["average_rank"] = {{"overall", report.ranks.overall},
                         {"mse", report.ranks.by_mse},
                         {"mae", report.ranks.by_mae}};
    return j;
}

// Wide CSV, one row per (dataset, horizon), MSE/MAE column pair per strategy.
inline std::string report_to_csv(const EvalReport& report, const ExperimentConfig& cfg) {
    std::vector<std::string> strategies;
    for (StrategyKind s : cfg.strategies) strategies.emplace_back(strategy_name(s));

    std::map<std::pair<std::string, std::size_t>, std::map<std::string, const CellResult*>> grid;
    for (const auto& c : report.cells) grid[{c.dataset, c.horizon}][c.strategy] = &c;

    std::string out = "dataset,horizon";
    for (const auto& s : strategies) out += "," + s + "_mse," + s + "_mae";
    out += "\n";

    for (const DatasetSpec& spec : cfg.datasets) {
        for (std::size_t h : cfg.horizons) {
            const auto it = grid.find({spec.name, h});
            out += spec.name + "," + std::to_string(h);
            for (const auto& s : strategies) {
                const CellResult* cell = nullptr;
                if (it != grid.end()) {
                    const auto cit = it->second.find(s);
                    if (cit != it->second.end()) cell = cit->second;
                }
                out += cell ? "," + format_double(cell->mse) + "," + format_double(cell->mae)
                            : ",,";
            }
            out += "\n";
        }
    }
    return out;
}

inline std::string portraits_to_csv(const EvalReport& report) {
    std::string out =
        "dataset,avg_k_emp,avg_skewness,avg_kurtosis,cpr_rate,windows_profiled,degenerate_windows\n";
    for (const auto& [name, p] : report.portraits) {
        out += name + "," + format_double(p.avg_k_emp) + ",";
        out += p.avg_skewness ? format_double(*p.avg_skewness) : "NaN";
        out += ",";
        out += p.avg_kurtosis ? format_double(*p.avg_kurtosis) : "NaN";
        out += "," + format_double(p.cpr_rate) + "," + std::to_string(p.windows_profiled) + "," +
               std::to_string(p.degenerate_windows) + "\n";
    }
    return out;
}

inline std::string ranks_to_csv(const RankTable& ranks) {
    std::string out = "strategy,avg_rank,avg_rank_mse,avg_rank_mae\n";
    for (const auto& [name, r] : ranks.overall) {
        out += name + "," + format_double(r) + "," + format_double(ranks.by_mse.at(name)) + "," +
               format_double(ranks.by_mae.at(name)) + "\n";
    }
    return out;
}

// Write report.json, report.csv, portraits.csv and plotdata/ under dir.
inline void write_report(const EvalReport& report, const ExperimentConfig& cfg,
                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "plotdata");
    auto dump = [](const std::filesystem::path& p, const std::string& content) {
        std::ofstream out(p, std::ios::binary);
        if (!out) {
            throw Error(Error::Code::Config, "cannot write " + p.string());
        }
        out << content;
    };
    dump(dir / "report.json", report_to_json(report, cfg).dump(2) + "\n");
    dump(dir / "report.csv", report_to_csv(report, cfg));
    dump(dir / "portraits.csv", portraits_to_csv(report));
    dump(dir / "plotdata" / "avg_rank.csv", ranks_to_csv(report.ranks));
}

} // namespace tsnorm
