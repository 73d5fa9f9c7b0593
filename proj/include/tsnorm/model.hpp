#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsnorm/error.hpp"
#include "tsnorm/normalize.hpp"
#include "tsnorm/series.hpp"

namespace tsnorm {

// Moving-average decomposition with replicate padding at both ends.
// remainder[t] is the exact pointwise difference window[t] - trend[t], so the
// decomposition identity carries no approximation error of its own.
inline std::pair<std::vector<double>, std::vector<double>>
decompose(std::span<const double> window, int kernel_size) {
    const std::size_t n = window.size();
    if (kernel_size < 1 || kernel_size % 2 == 0 ||
        static_cast<std::size_t>(kernel_size) > 2 * n - 1) {
        throw Error(Error::Code::InvalidKernel,
                    "decompose: kernel_size must be odd, >= 1 and <= 2L-1");
    }
    const int half = kernel_size / 2;
    std::vector<double> trend(n), remainder(n);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) {
            std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t) + i;
            if (j < 0) j = 0;
            if (j >= static_cast<std::ptrdiff_t>(n)) j = static_cast<std::ptrdiff_t>(n) - 1;
            acc += window[static_cast<std::size_t>(j)];
        }
        trend[t] = acc / static_cast<double>(kernel_size);
        remainder[t] = window[t] - trend[t];
    }
    return {std::move(trend), std::move(remainder)};
}

enum class ChannelMode { SharedAcrossChannels, PerChannel };
enum class OptimizerKind { SGD, Adam };

// One trend/remainder linear map pair: y = Wt * trend + bt + Wr * rem + br.
struct LayerPair {
    Matrix w_trend;                 // H x L
    std::vector<double> b_trend;    // H
    Matrix w_remainder;             // H x L
    std::vector<double> b_remainder;// H

    static LayerPair zeros(std::size_t horizon, std::size_t lookback) {
        LayerPair p;
        p.w_trend = Matrix(horizon, lookback);
        p.w_remainder = Matrix(horizon, lookback);
        p.b_trend.assign(horizon, 0.0);
        p.b_remainder.assign(horizon, 0.0);
        return p;
    }
};

namespace detail {
inline std::array<std::span<double>, 4> param_spans(LayerPair& p) {
    return {p.w_trend.data(), std::span<double>(p.b_trend), p.w_remainder.data(),
            std::span<double>(p.b_remainder)};
}
} // namespace detail

struct LinearForecaster {
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::size_t channels = 1;
    int kernel_size = 25;
    ChannelMode channel_mode = ChannelMode::SharedAcrossChannels;
    std::vector<LayerPair> layers; // one shared pair, or one per channel

    const LayerPair& layer_for(std::size_t channel) const {
        return channel_mode == ChannelMode::PerChannel ? layers[channel] : layers[0];
    }

    bool all_finite() const {
        for (const auto& l : layers) {
            auto check = [](std::span<const double> s) {
                for (double v : s) {
                    if (!std::isfinite(v)) return false;
                }
                return true;
            };
            if (!check(l.w_trend.data()) || !check(l.b_trend) ||
                !check(l.w_remainder.data()) || !check(l.b_remainder)) {
                return false;
            }
        }
        return true;
    }
};

// Forecast from a normalized L x C lookback to a normalized H x C horizon.
inline Matrix forward(const LinearForecaster& model, const Matrix& normalized_lookback) {
    if (normalized_lookback.rows() != model.lookback ||
        normalized_lookback.cols() != model.channels) {
        throw Error(Error::Code::ShapeMismatch, "forward: input shape does not match model");
    }
    if (!normalized_lookback.all_finite()) {
        throw Error(Error::Code::NonFiniteInput, "forward: non-finite input");
    }
    Matrix out(model.horizon, model.channels);
    for (std::size_t c = 0; c < model.channels; ++c) {
        const auto [trend, rem] = decompose(normalized_lookback.column(c), model.kernel_size);
        const LayerPair& layer = model.layer_for(c);
        for (std::size_t h = 0; h < model.horizon; ++h) {
            double acc = layer.b_trend[h] + layer.b_remainder[h];
            const std::span<const double> wt = layer.w_trend.row(h);
            const std::span<const double> wr = layer.w_remainder.row(h);
            for (std::size_t l = 0; l < model.lookback; ++l) {
                acc += wt[l] * trend[l] + wr[l] * rem[l];
            }
            out(h, c) = acc;
        }
    }
    return out;
}

namespace detail {

// Decomposed input plus normalized target for one (instance, channel) pair.
struct PreparedChannel {
    std::vector<double> trend;
    std::vector<double> remainder;
    std::vector<double> target;
};

struct PreparedInstance {
    std::vector<PreparedChannel> ch;
};

inline PreparedInstance prepare_normalized(const Matrix& input, const Matrix& target,
                                           int kernel_size) {
    PreparedInstance p;
    p.ch.resize(input.cols());
    for (std::size_t c = 0; c < input.cols(); ++c) {
        auto [trend, rem] = decompose(input.column(c), kernel_size);
        p.ch[c].trend = std::move(trend);
        p.ch[c].remainder = std::move(rem);
        p.ch[c].target = target.column(c);
    }
    return p;
}

// Batch-mean MSE over (instances x H x C) and, optionally, its analytic
// gradients. This is the single gradient path used by both the trainer and
// the public loss/gradient entry points.
inline double batch_loss_and_gradients(const LinearForecaster& model,
                                       std::span<const PreparedInstance* const> batch,
                                       std::vector<LayerPair>* grads) {
    const std::size_t H = model.horizon;
    const std::size_t L = model.lookback;
    const std::size_t C = model.channels;
    const double denom = static_cast<double>(batch.size() * H * C);

    if (grads) {
        grads->assign(model.layers.size(), LayerPair::zeros(H, L));
    }

    double loss = 0.0;
    for (const PreparedInstance* inst : batch) {
        for (std::size_t c = 0; c < C; ++c) {
            const PreparedChannel& pc = inst->ch[c];
            const LayerPair& layer = model.layer_for(c);
            LayerPair* g = grads ? &(*grads)[model.channel_mode == ChannelMode::PerChannel ? c : 0]
                                 : nullptr;
            for (std::size_t h = 0; h < H; ++h) {
                double pred = layer.b_trend[h] + layer.b_remainder[h];
                const std::span<const double> wt = layer.w_trend.row(h);
                const std::span<const double> wr = layer.w_remainder.row(h);
                for (std::size_t l = 0; l < L; ++l) {
                    pred += wt[l] * pc.trend[l] + wr[l] * pc.remainder[l];
                }
                const double err = pred - pc.target[h];
                loss += err * err;
                if (g) {
                    const double d = 2.0 * err / denom;
                    const std::span<double> gwt = g->w_trend.row(h);
                    const std::span<double> gwr = g->w_remainder.row(h);
                    for (std::size_t l = 0; l < L; ++l) {
                        gwt[l] += d * pc.trend[l];
                        gwr[l] += d * pc.remainder[l];
                    }
                    g->b_trend[h] += d;
                    g->b_remainder[h] += d;
                }
            }
        }
    }
    return loss / denom;
}

} // namespace detail

// Loss (and gradients) on already-normalized input/target pairs. Exposed so
// the analytic gradients can be checked against finite differences.
inline double mse_loss(const LinearForecaster& model, std::span<const Matrix> inputs,
                       std::span<const Matrix> targets) {
    if (inputs.size() != targets.size() || inputs.empty()) {
        throw Error(Error::Code::ShapeMismatch, "mse_loss: inputs/targets size mismatch");
    }
    std::vector<detail::PreparedInstance> prepared;
    prepared.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        prepared.push_back(detail::prepare_normalized(inputs[i], targets[i], model.kernel_size));
    }
    std::vector<const detail::PreparedInstance*> ptrs;
    for (const auto& p : prepared) ptrs.push_back(&p);
    return detail::batch_loss_and_gradients(model, ptrs, nullptr);
}

inline double mse_loss_and_gradients(const LinearForecaster& model,
                                     std::span<const Matrix> inputs,
                                     std::span<const Matrix> targets,
                                     std::vector<LayerPair>& grads) {
    if (inputs.size() != targets.size() || inputs.empty()) {
        throw Error(Error::Code::ShapeMismatch, "mse_loss_and_gradients: inputs/targets size mismatch");
    }
    std::vector<detail::PreparedInstance> prepared;
    prepared.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        prepared.push_back(detail::prepare_normalized(inputs[i], targets[i], model.kernel_size));
    }
    std::vector<const detail::PreparedInstance*> ptrs;
    for (const auto& p : prepared) ptrs.push_back(&p);
    return detail::batch_loss_and_gradients(model, ptrs, &grads);
}

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 0;
    int early_stop_patience = 3; // 0 disables early stopping
    double val_fraction = 0.1;   // carved from the end of the train set when no val set is given
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int kernel_size = 25;
    ChannelMode channel_mode = ChannelMode::SharedAcrossChannels;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1; // epoch whose parameters were kept, -1 = last
    bool stopped_early = false;

    void save_jsonl(const std::string& path) const {
        std::ofstream out(path);
        if (!out) {
            throw Error(Error::Code::Config, "cannot open training log for writing: " + path);
        }
        for (const auto& e : epochs) {
            nlohmann::json j{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
            if (e.val_loss) j["val_loss"] = *e.val_loss;
            out << j.dump() << '\n';
        }
        nlohmann::json tail{{"best_epoch", best_epoch}, {"stopped_early", stopped_early}};
        out << tail.dump() << '\n';
    }
};

struct TrainResult {
    LinearForecaster model;
    TrainingLog log;
};

// Train a forecaster on normalized instances, minimizing MSE between the
// model output and the target normalized with the *same* per-instance stats
// as the lookback. Single-threaded and fully deterministic for a given seed.
// When a validation set is present (given, or carved from the tail of the
// train set), early stopping keeps the parameters of the best-validation
// epoch.
inline TrainResult train(std::span<const Instance> train_set, std::span<const Instance> val_set,
                         const Strategy& strategy, const NormConfig& norm_config,
                         const TrainConfig& config) {
    if (train_set.empty()) {
        throw Error(Error::Code::EmptyDataset, "train: empty training set");
    }
    if (strategy.kind == StrategyKind::AIN) {
        throw Error(Error::Code::StrategyUnresolved, "train: AIN must be resolved before training");
    }
    if (config.learning_rate <= 0.0 || config.epochs < 1 || config.batch_size < 1) {
        throw Error(Error::Code::InvalidParams, "train: bad optimizer settings");
    }

    const std::size_t L = train_set[0].lookback_length();
    const std::size_t H = train_set[0].horizon();
    const std::size_t C = train_set[0].channels();
    if (H == 0) {
        throw Error(Error::Code::ShapeMismatch, "train: instances carry no target");
    }
    auto check_shape = [&](const Instance& inst) {
        if (inst.lookback_length() != L || inst.horizon() != H || inst.channels() != C) {
            throw Error(Error::Code::ShapeMismatch, "train: inconsistent instance shapes");
        }
    };
    for (const auto& inst : train_set) check_shape(inst);
    for (const auto& inst : val_set) check_shape(inst);

    // Carve a chronological tail for validation if early stopping is wanted
    // and no validation set was supplied.
    std::span<const Instance> effective_train = train_set;
    std::span<const Instance> effective_val = val_set;
    if (val_set.empty() && config.early_stop_patience > 0) {
        const auto n_val = static_cast<std::size_t>(
            static_cast<double>(train_set.size()) * config.val_fraction);
        if (n_val >= 1 && n_val < train_set.size()) {
            effective_train = train_set.subspan(0, train_set.size() - n_val);
            effective_val = train_set.subspan(train_set.size() - n_val);
        }
    }

    auto prepare = [&](std::span<const Instance> set) {
        std::vector<detail::PreparedInstance> out;
        out.reserve(set.size());
        for (const Instance& inst : set) {
            const NormStats s = fit(strategy, inst.lookback, norm_config);
            out.push_back(detail::prepare_normalized(normalize(inst.lookback, s),
                                                     normalize(inst.target, s),
                                                     config.kernel_size));
        }
        return out;
    };
    const std::vector<detail::PreparedInstance> prepared_train = prepare(effective_train);
    const std::vector<detail::PreparedInstance> prepared_val = prepare(effective_val);

    LinearForecaster model;
    model.lookback = L;
    model.horizon = H;
    model.channels = C;
    model.kernel_size = config.kernel_size;
    model.channel_mode = config.channel_mode;
    const std::size_t n_layers = config.channel_mode == ChannelMode::PerChannel ? C : 1;

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> init(-1.0 / static_cast<double>(L),
                                                1.0 / static_cast<double>(L));
    for (std::size_t i = 0; i < n_layers; ++i) {
        LayerPair p = LayerPair::zeros(H, L);
        for (auto s : detail::param_spans(p)) {
            for (double& v : s) v = init(rng);
        }
        model.layers.push_back(std::move(p));
    }

    std::vector<LayerPair> adam_m, adam_v;
    if (config.optimizer == OptimizerKind::Adam) {
        adam_m.assign(n_layers, LayerPair::zeros(H, L));
        adam_v.assign(n_layers, LayerPair::zeros(H, L));
    }

    auto val_loss = [&]() -> std::optional<double> {
        if (prepared_val.empty()) return std::nullopt;
        std::vector<const detail::PreparedInstance*> ptrs;
        ptrs.reserve(prepared_val.size());
        for (const auto& p : prepared_val) ptrs.push_back(&p);
        return detail::batch_loss_and_gradients(model, ptrs, nullptr);
    };

    TrainingLog log;
    std::vector<std::size_t> order(prepared_train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<LayerPair> grads;
    LinearForecaster best_model;
    double best_val = std::numeric_limits<double>::infinity();
    int no_improve = 0;
    std::size_t adam_step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<const detail::PreparedInstance*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&prepared_train[order[i]]);

            const double loss = detail::batch_loss_and_gradients(model, batch, &grads);
            if (!std::isfinite(loss)) {
                throw Error(Error::Code::NonFiniteLoss,
                            "train: non-finite loss in epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch_index));
            }
            epoch_loss += loss * static_cast<double>(end - start);

            if (config.optimizer == OptimizerKind::Adam) {
                ++adam_step;
                const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam_step));
                const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam_step));
                for (std::size_t li = 0; li < n_layers; ++li) {
                    auto ps = detail::param_spans(model.layers[li]);
                    auto gs = detail::param_spans(grads[li]);
                    auto ms = detail::param_spans(adam_m[li]);
                    auto vs = detail::param_spans(adam_v[li]);
                    for (int k = 0; k < 4; ++k) {
                        for (std::size_t j = 0; j < ps[k].size(); ++j) {
                            const double g = gs[k][j];
                            ms[k][j] = config.adam_beta1 * ms[k][j] + (1.0 - config.adam_beta1) * g;
                            vs[k][j] = config.adam_beta2 * vs[k][j] + (1.0 - config.adam_beta2) * g * g;
                            const double mhat = ms[k][j] / bc1;
                            const double vhat = vs[k][j] / bc2;
                            ps[k][j] -= config.learning_rate * mhat /
                                        (std::sqrt(vhat) + config.adam_epsilon);
                        }
                    }
                }
            } else {
                for (std::size_t li = 0; li < n_layers; ++li) {
                    auto ps = detail::param_spans(model.layers[li]);
                    auto gs = detail::param_spans(grads[li]);
                    for (int k = 0; k < 4; ++k) {
                        for (std::size_t j = 0; j < ps[k].size(); ++j) {
                            ps[k][j] -= config.learning_rate * gs[k][j];
                        }
                    }
                }
            }
        }

        if (!model.all_finite()) {
            throw Error(Error::Code::NonFiniteLoss,
                        "train: non-finite parameter after epoch " + std::to_string(epoch));
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(prepared_train.size());
        rec.val_loss = val_loss();
        log.epochs.push_back(rec);

        if (rec.val_loss && config.early_stop_patience > 0) {
            if (*rec.val_loss < best_val) {
                best_val = *rec.val_loss;
                best_model = model;
                log.best_epoch = epoch;
                no_improve = 0;
            } else {
                ++no_improve;
                if (no_improve >= config.early_stop_patience) {
                    log.stopped_early = true;
                    break;
                }
            }
        }
    }

    if (log.best_epoch >= 0) {
        model = std::move(best_model);
    }
    return {std::move(model), std::move(log)};
}

// Self-describing JSON checkpoint: shape header plus row-major values.
inline void save_checkpoint(const LinearForecaster& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = "tsnorm-linear-forecaster";
    j["version"] = 1;
    j["lookback"] = model.lookback;
    j["horizon"] = model.horizon;
    j["channels"] = model.channels;
    j["kernel_size"] = model.kernel_size;
    j["channel_mode"] =
        model.channel_mode == ChannelMode::PerChannel ? "per_channel" : "shared";
    auto matrix_json = [](const Matrix& m) {
        return nlohmann::json{{"rows", m.rows()},
                              {"cols", m.cols()},
                              {"data", std::vector<double>(m.data().begin(), m.data().end())}};
    };
    j["layers"] = nlohmann::json::array();
    for (const auto& l : model.layers) {
        j["layers"].push_back({{"w_trend", matrix_json(l.w_trend)},
                               {"b_trend", l.b_trend},
                               {"w_remainder", matrix_json(l.w_remainder)},
                               {"b_remainder", l.b_remainder}});
    }
    std::ofstream out(path);
    if (!out) {
        throw Error(Error::Code::Config, "cannot open checkpoint for writing: " + path);
    }
    out << j.dump(2) << '\n';
}

inline LinearForecaster load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Error::Code::FileNotFound, "checkpoint not found: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Error::Code::Parse, std::string("bad checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "tsnorm-linear-forecaster") {
        throw Error(Error::Code::Parse, "bad checkpoint: unknown format");
    }
    LinearForecaster m;
    m.lookback = j.at("lookback").get<std::size_t>();
    m.horizon = j.at("horizon").get<std::size_t>();
    m.channels = j.at("channels").get<std::size_t>();
    m.kernel_size = j.at("kernel_size").get<int>();
    m.channel_mode = j.at("channel_mode").get<std::string>() == "per_channel"
                         ? ChannelMode::PerChannel
                         : ChannelMode::SharedAcrossChannels;
    auto matrix_from = [](const nlohmann::json& mj) {
        Matrix m(mj.at("rows").get<std::size_t>(), mj.at("cols").get<std::size_t>());
        const auto data = mj.at("data").get<std::vector<double>>();
        if (data.size() != m.rows() * m.cols()) {
            throw Error(Error::Code::Parse, "bad checkpoint: matrix size mismatch");
        }
        std::copy(data.begin(), data.end(), m.data().begin());
        return m;
    };
    for (const auto& lj : j.at("layers")) {
        LayerPair l;
        l.w_trend = matrix_from(lj.at("w_trend"));
        l.b_trend = lj.at("b_trend").get<std::vector<double>>();
        l.w_remainder = matrix_from(lj.at("w_remainder"));
        l.b_remainder = lj.at("b_remainder").get<std::vector<double>>();
        m.layers.push_back(std::move(l));
    }
    return m;
}

} // namespace tsnorm
