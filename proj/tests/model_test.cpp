#include "tsnorm/model.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

using namespace tsnorm;
using Catch::Approx;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = d(rng);
    }
    return m;
}

LinearForecaster random_model(std::size_t L, std::size_t H, std::size_t C, int kernel,
                              std::mt19937& rng) {
    LinearForecaster m;
    m.lookback = L;
    m.horizon = H;
    m.channels = C;
    m.kernel_size = kernel;
    m.channel_mode = ChannelMode::SharedAcrossChannels;
    LayerPair p = LayerPair::zeros(H, L);
    std::normal_distribution<double> d(0.0, 0.3);
    for (auto& v : p.w_trend.data()) v = d(rng);
    for (auto& v : p.w_remainder.data()) v = d(rng);
    for (auto& v : p.b_trend) v = d(rng);
    for (auto& v : p.b_remainder) v = d(rng);
    m.layers.push_back(std::move(p));
    return m;
}

// Instances following target = A * lookback, a noiseless recoverable map.
std::vector<Instance> linear_map_instances(std::size_t count, std::size_t L, std::size_t H,
                                           unsigned seed) {
    std::mt19937 rng(seed);
    Matrix a(H, L);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t l = 0; l < L; ++l) {
            a(h, l) = (l == h || l == h + 2) ? 0.5 : 0.0;
        }
    }
    std::vector<Instance> out;
    for (std::size_t i = 0; i < count; ++i) {
        Instance inst;
        inst.lookback = random_matrix(L, 1, rng);
        inst.target = Matrix(H, 1);
        for (std::size_t h = 0; h < H; ++h) {
            double acc = 0.0;
            for (std::size_t l = 0; l < L; ++l) acc += a(h, l) * inst.lookback(l, 0);
            inst.target(h, 0) = acc;
        }
        out.push_back(std::move(inst));
    }
    return out;
}

} // namespace

TEST_CASE("decompose: kernel 1, constants and the bump fixture", "[model]") {
    const std::vector<double> window{1.0, -2.0, 3.5, 0.25};
    {
        const auto [trend, rem] = decompose(window, 1);
        CHECK(trend == window);
        for (double r : rem) CHECK(r == 0.0);
    }
    {
        const std::vector<double> flat(9, 4.0);
        const auto [trend, rem] = decompose(flat, 5);
        CHECK(trend == flat);
        for (double r : rem) CHECK(r == 0.0);
    }
    {
        const std::vector<double> bump{0, 0, 0, 0, 9, 0, 0, 0, 0};
        const auto [trend, rem] = decompose(bump, 3);
        const std::vector<double> expected{0, 0, 0, 3, 3, 3, 0, 0, 0};
        CHECK(trend == expected);
        for (std::size_t i = 0; i < bump.size(); ++i) {
            CHECK(rem[i] == bump[i] - trend[i]);
        }
    }
    CHECK_THROWS_AS(decompose(window, 2), Error);  // even
    CHECK_THROWS_AS(decompose(window, -3), Error); // negative
    CHECK_THROWS_AS(decompose(window, 9), Error);  // > 2L-1
}

TEST_CASE("decompose reconstruction is exact for random windows", "[model]") {
    std::mt19937 rng(81);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng() % 60;
        std::vector<double> w(n);
        std::normal_distribution<double> d(0.0, 10.0);
        for (double& v : w) v = d(rng);
        const int kernel = 1 + 2 * static_cast<int>(rng() % std::min<std::size_t>(n, 12));
        const auto [trend, rem] = decompose(w, kernel);
        for (std::size_t i = 0; i < n; ++i) {
            // the remainder is the exact pointwise complement of the trend,
            // so the identity has no approximation error of its own; the
            // re-summed check is tight to the final rounding
            CHECK(rem[i] == w[i] - trend[i]);
            CHECK(trend[i] + rem[i] ==
                  Approx(w[i]).margin(2.0 * std::numeric_limits<double>::epsilon() *
                                      std::max({std::fabs(w[i]), std::fabs(trend[i]),
                                                std::fabs(rem[i])})));
        }
    }
}

TEST_CASE("forward: zero model, averaging weights, identity weights", "[model]") {
    std::mt19937 rng(7);

    SECTION("zero weights produce a zero forecast") {
        LinearForecaster m;
        m.lookback = 6;
        m.horizon = 3;
        m.channels = 2;
        m.kernel_size = 3;
        m.layers.push_back(LayerPair::zeros(3, 6));
        const Matrix out = forward(m, random_matrix(6, 2, rng));
        for (double v : out.data()) CHECK(v == 0.0);
    }

    SECTION("1/L weights on both branches reproduce a constant input") {
        const std::size_t L = 8, H = 4;
        LinearForecaster m;
        m.lookback = L;
        m.horizon = H;
        m.channels = 1;
        m.kernel_size = 5;
        LayerPair p = LayerPair::zeros(H, L);
        for (auto& v : p.w_trend.data()) v = 1.0 / static_cast<double>(L);
        for (auto& v : p.w_remainder.data()) v = 1.0 / static_cast<double>(L);
        m.layers.push_back(std::move(p));
        Matrix input(L, 1, 2.75);
        const Matrix out = forward(m, input);
        for (double v : out.data()) CHECK(v == Approx(2.75).epsilon(1e-12));
    }

    SECTION("identity weights with H = L echo the window") {
        const std::size_t L = 5;
        LinearForecaster m;
        m.lookback = L;
        m.horizon = L;
        m.channels = 1;
        m.kernel_size = 3;
        LayerPair p = LayerPair::zeros(L, L);
        for (std::size_t i = 0; i < L; ++i) {
            p.w_trend(i, i) = 1.0;
            p.w_remainder(i, i) = 1.0;
        }
        m.layers.push_back(std::move(p));
        const Matrix input = random_matrix(L, 1, rng);
        const Matrix out = forward(m, input);
        for (std::size_t i = 0; i < L; ++i) {
            CHECK(out(i, 0) == Approx(input(i, 0)).epsilon(1e-12));
        }
    }

    SECTION("shape mismatch is rejected") {
        LinearForecaster m;
        m.lookback = 6;
        m.horizon = 3;
        m.channels = 1;
        m.kernel_size = 3;
        m.layers.push_back(LayerPair::zeros(3, 6));
        CHECK_THROWS_AS(forward(m, Matrix(5, 1)), Error);
        CHECK_THROWS_AS(forward(m, Matrix(6, 2)), Error);
    }
}

TEST_CASE("forward is linear in its input", "[model]") {
    std::mt19937 rng(23);
    LinearForecaster m = random_model(10, 4, 2, 3, rng);
    // zero the biases: linearity is a property of the weight maps
    for (auto& v : m.layers[0].b_trend) v = 0.0;
    for (auto& v : m.layers[0].b_remainder) v = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = random_matrix(10, 2, rng);
        const Matrix y = random_matrix(10, 2, rng);
        const double alpha = 1.7, beta = -0.4;
        Matrix combo(10, 2);
        for (std::size_t r = 0; r < 10; ++r) {
            for (std::size_t c = 0; c < 2; ++c) combo(r, c) = alpha * x(r, c) + beta * y(r, c);
        }
        const Matrix fx = forward(m, x);
        const Matrix fy = forward(m, y);
        const Matrix fc = forward(m, combo);
        for (std::size_t r = 0; r < fc.rows(); ++r) {
            for (std::size_t c = 0; c < fc.cols(); ++c) {
                CHECK(fc(r, c) ==
                      Approx(alpha * fx(r, c) + beta * fy(r, c)).epsilon(1e-9).margin(1e-12));
            }
        }
    }
}

TEST_CASE("analytic gradients match central finite differences", "[model]") {
    std::mt19937 rng(2718);
    const std::size_t L = 8, H = 4, C = 2;
    const double h = 1e-5;

    for (int fixture = 0; fixture < 10; ++fixture) {
        LinearForecaster model = random_model(L, H, C, 3, rng);
        std::vector<Matrix> inputs, targets;
        for (int i = 0; i < 3; ++i) {
            inputs.push_back(random_matrix(L, C, rng));
            targets.push_back(random_matrix(H, C, rng));
        }

        std::vector<LayerPair> grads;
        mse_loss_and_gradients(model, inputs, targets, grads);

        auto check_block = [&](std::span<double> params, std::span<const double> analytic) {
            for (std::size_t j = 0; j < params.size(); ++j) {
                const double saved = params[j];
                params[j] = saved + h;
                const double up = mse_loss(model, inputs, targets);
                params[j] = saved - h;
                const double down = mse_loss(model, inputs, targets);
                params[j] = saved;
                const double fd = (up - down) / (2.0 * h);
                CHECK(analytic[j] == Approx(fd).epsilon(1e-4).margin(1e-7));
            }
        };
        check_block(model.layers[0].w_trend.data(), grads[0].w_trend.data());
        check_block(model.layers[0].b_trend, grads[0].b_trend);
        check_block(model.layers[0].w_remainder.data(), grads[0].w_remainder.data());
        check_block(model.layers[0].b_remainder, grads[0].b_remainder);
    }
}

TEST_CASE("train recovers a noiseless linear map", "[model]") {
    const auto train_set = linear_map_instances(64, 8, 4, 424242);
    const auto holdout = linear_map_instances(32, 8, 4, 171717);

    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 400;
    cfg.batch_size = 64;
    cfg.seed = 3;
    cfg.early_stop_patience = 0;
    cfg.kernel_size = 3;

    const TrainResult result = train(train_set, {}, {StrategyKind::Identity}, {}, cfg);

    std::vector<Matrix> inputs, targets;
    for (const auto& inst : holdout) {
        inputs.push_back(inst.lookback);
        targets.push_back(inst.target);
    }
    CHECK(mse_loss(result.model, inputs, targets) < 1e-6);
}

TEST_CASE("train on a constant series learns the constant", "[model]") {
    std::vector<Instance> instances;
    for (int i = 0; i < 16; ++i) {
        Instance inst;
        inst.lookback = Matrix(12, 1, 3.0);
        inst.target = Matrix(4, 1, 3.0);
        instances.push_back(std::move(inst));
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 300;
    cfg.batch_size = 16;
    cfg.seed = 5;
    cfg.early_stop_patience = 0;
    cfg.kernel_size = 5;
    const TrainResult result = train(instances, {}, {StrategyKind::Identity}, {}, cfg);
    const Matrix out = forward(result.model, Matrix(12, 1, 3.0));
    for (double v : out.data()) CHECK(v == Approx(3.0).margin(1e-3));
    CHECK(result.log.epochs.back().train_loss < 1e-6);
}

TEST_CASE("training is bitwise deterministic for a fixed seed", "[model]") {
    const auto instances = linear_map_instances(40, 8, 4, 99);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.seed = 1234;
    cfg.kernel_size = 3;

    const TrainResult a = train(instances, {}, {StrategyKind::RevIN}, {}, cfg);
    const TrainResult b = train(instances, {}, {StrategyKind::RevIN}, {}, cfg);

    REQUIRE(a.model.layers.size() == b.model.layers.size());
    CHECK(a.model.layers[0].w_trend == b.model.layers[0].w_trend);
    CHECK(a.model.layers[0].w_remainder == b.model.layers[0].w_remainder);
    CHECK(a.model.layers[0].b_trend == b.model.layers[0].b_trend);
    CHECK(a.model.layers[0].b_remainder == b.model.layers[0].b_remainder);
    REQUIRE(a.log.epochs.size() == b.log.epochs.size());
    for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
        CHECK(a.log.epochs[i].train_loss == b.log.epochs[i].train_loss);
    }
}

TEST_CASE("full-batch SGD loss is non-increasing on the noiseless fixture", "[model]") {
    const auto instances = linear_map_instances(32, 8, 4, 11);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 50;
    cfg.batch_size = 32; // full batch
    cfg.seed = 8;
    cfg.early_stop_patience = 0;
    cfg.optimizer = OptimizerKind::SGD;
    cfg.kernel_size = 3;
    const TrainResult result = train(instances, {}, {StrategyKind::Identity}, {}, cfg);
    for (std::size_t i = 1; i < result.log.epochs.size(); ++i) {
        CHECK(result.log.epochs[i].train_loss <= result.log.epochs[i - 1].train_loss);
    }
}

TEST_CASE("per-channel mode fits channel-specific maps", "[model]") {
    std::mt19937 rng(33);
    std::vector<Instance> instances;
    for (int i = 0; i < 48; ++i) {
        Instance inst;
        inst.lookback = random_matrix(8, 2, rng);
        inst.target = Matrix(2, 2);
        // channel 0 repeats the last value, channel 1 the negated first value
        for (std::size_t h = 0; h < 2; ++h) {
            inst.target(h, 0) = inst.lookback(7, 0);
            inst.target(h, 1) = -inst.lookback(0, 1);
        }
        instances.push_back(std::move(inst));
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 400;
    cfg.batch_size = 48;
    cfg.seed = 21;
    cfg.early_stop_patience = 0;
    cfg.kernel_size = 3;
    cfg.channel_mode = ChannelMode::PerChannel;
    const TrainResult result = train(instances, {}, {StrategyKind::Identity}, {}, cfg);
    REQUIRE(result.model.layers.size() == 2);
    CHECK(result.log.epochs.back().train_loss < 1e-5);
}

TEST_CASE("train validates inputs", "[model]") {
    CHECK_THROWS_AS(train({}, {}, {StrategyKind::RevIN}, {}, {}), Error);

    const auto instances = linear_map_instances(8, 8, 4, 1);
    try {
        train(instances, {}, {StrategyKind::AIN}, {}, {});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Error::Code::StrategyUnresolved);
    }
}

TEST_CASE("early stopping keeps the best-validation parameters", "[model]") {
    const auto train_set = linear_map_instances(60, 8, 4, 5);
    const auto val_set = linear_map_instances(20, 8, 4, 6);
    TrainConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.epochs = 200;
    cfg.batch_size = 20;
    cfg.seed = 77;
    cfg.early_stop_patience = 3;
    cfg.kernel_size = 3;
    const TrainResult result = train(train_set, val_set, {StrategyKind::Identity}, {}, cfg);
    REQUIRE(result.log.best_epoch >= 0);
    for (const auto& rec : result.log.epochs) {
        REQUIRE(rec.val_loss.has_value());
    }
    // the kept parameters reproduce the recorded best validation loss
    std::vector<Matrix> inputs, targets;
    for (const auto& inst : val_set) {
        inputs.push_back(inst.lookback);
        targets.push_back(inst.target);
    }
    const double best_recorded =
        *result.log.epochs[static_cast<std::size_t>(result.log.best_epoch)].val_loss;
    CHECK(mse_loss(result.model, inputs, targets) == Approx(best_recorded).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trips through JSON", "[model]") {
    std::mt19937 rng(62);
    const LinearForecaster model = random_model(10, 5, 1, 5, rng);
    const auto path = std::filesystem::temp_directory_path() / "tsnorm_ckpt_test.json";
    save_checkpoint(model, path.string());
    const LinearForecaster loaded = load_checkpoint(path.string());
    CHECK(loaded.lookback == model.lookback);
    CHECK(loaded.horizon == model.horizon);
    CHECK(loaded.kernel_size == model.kernel_size);
    REQUIRE(loaded.layers.size() == 1);
    CHECK(loaded.layers[0].w_trend == model.layers[0].w_trend);
    CHECK(loaded.layers[0].b_trend == model.layers[0].b_trend);
    CHECK(loaded.layers[0].w_remainder == model.layers[0].w_remainder);
    CHECK(loaded.layers[0].b_remainder == model.layers[0].b_remainder);
    const Matrix x = random_matrix(10, 1, rng);
    CHECK(forward(loaded, x) == forward(model, x));
    std::filesystem::remove(path);
}

TEST_CASE("training log serializes to JSON lines", "[model]") {
    const auto instances = linear_map_instances(20, 8, 4, 404);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 4;
    cfg.seed = 2;
    cfg.early_stop_patience = 0;
    cfg.kernel_size = 3;
    const TrainResult result = train(instances, {}, {StrategyKind::Identity}, {}, cfg);
    const auto path = std::filesystem::temp_directory_path() / "tsnorm_log_test.jsonl";
    result.log.save_jsonl(path.string());
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        CHECK_FALSE(nlohmann::json::parse(line).is_discarded());
        ++lines;
    }
    CHECK(lines == result.log.epochs.size() + 1); // one per epoch plus the tail
    std::filesystem::remove(path);
}
