#include <gtest/gtest.h>

#include "auxol/adamw.hpp"
#include "auxol/aux_model.hpp"
#include "auxol/checkpoint.hpp"
#include "oracles.hpp"

using namespace auxol;

namespace {

std::vector<float> random_patch(Rng& rng, const AuxConfig& cfg) {
    std::vector<float> x(cfg.patch_values());
    for (auto& v : x) v = static_cast<float>(rng.normal());
    return x;
}

std::vector<std::uint8_t> disc_target(int p) {
    std::vector<std::uint8_t> y(static_cast<std::size_t>(p) * p);
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) y[r * p + c] = (r - p / 2) * (r - p / 2) + (c - p / 2) * (c - p / 2) < p * p / 9;
    return y;
}

} // namespace

TEST(AuxInit, DeterministicPerSeed) {
    AuxConfig cfg;
    EXPECT_EQ(init_aux<float>(cfg), init_aux<float>(cfg));
    AuxConfig other = cfg;
    other.seed = 1;
    EXPECT_NE(init_aux<float>(cfg).values, init_aux<float>(other).values);
}

TEST(AuxInit, ParameterCountMatchesLayerShapes) {
    // enc1 1->16, enc2 16->32, mid 32->32, dec1 48->32, dec2 32->16 (3x3), head 16->1 (1x1), plus biases
    const std::size_t expected = (1 * 16 * 9 + 16) + (16 * 32 * 9 + 32) + (32 * 32 * 9 + 32) + (48 * 32 * 9 + 32) +
                                 (32 * 16 * 9 + 16) + (16 * 1 + 1);
    EXPECT_EQ(expected, 32545u);
    EXPECT_EQ(aux_parameter_count(AuxConfig{}), expected);
    EXPECT_EQ(init_aux<float>(AuxConfig{}).values.size(), expected);
    AuxConfig two{64, 2, {16, 32}, 0};
    EXPECT_EQ(aux_parameter_count(two), expected + 16 * 9);
}

TEST(AuxInit, RejectsBadConfig) {
    EXPECT_THROW(init_aux<float>(AuxConfig{48, 1, {16, 32}, 0}), InvalidArgument);
    EXPECT_THROW(init_aux<float>(AuxConfig{64, 3, {16, 32}, 0}), InvalidArgument);
    EXPECT_THROW(init_aux<float>(AuxConfig{64, 1, {0, 32}, 0}), InvalidArgument);
}

TEST(AuxForward, ShapeAndPurity) {
    AuxConfig cfg;
    const auto p = init_aux<float>(cfg);
    Rng rng(1);
    const auto x = random_patch(rng, cfg);
    const auto a = aux_forward<float>(p, x);
    EXPECT_EQ(a.logits.size(), cfg.output_values());
    EXPECT_EQ(aux_forward<float>(p, x).logits, a.logits);
    const std::vector<float> short_patch(10);
    EXPECT_THROW(aux_forward<float>(p, short_patch), ShapeMismatch);
}

TEST(AuxForward, ZeroInputGivesHeadBias) {
    AuxConfig cfg;
    auto p = init_aux<float>(cfg);
    const auto head = aux_layers(cfg)[kHead];
    p.values[head.bias_offset] = 0.375f;
    const std::vector<float> zeros(cfg.patch_values(), 0.0f);
    for (float v : aux_forward<float>(p, zeros).logits) EXPECT_EQ(v, 0.375f);
}

TEST(AuxBackward, MatchesFiniteDifferencesOnReducedNet) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto rep = oracle::finite_difference_check(seed);
        EXPECT_LT(rep.max_rel, 1e-4) << "seed " << seed << " worst index " << rep.worst_index;
        EXPECT_LE(rep.kinks * 50, rep.checked + rep.kinks) << "seed " << seed;
    }
    const auto two = oracle::finite_difference_check(4, 16, {3, 4}, 2);
    EXPECT_LT(two.max_rel, 1e-4);
}

TEST(AuxBackward, ZeroLossGradGivesZeroGradient) {
    AuxConfig cfg{16, 1, {4, 6}, 3};
    const auto p = init_aux<double>(cfg);
    Rng rng(2);
    std::vector<double> x(cfg.patch_values());
    for (auto& v : x) v = rng.normal();
    const auto f = aux_forward<double>(p, x);
    const std::vector<double> zero(cfg.output_values(), 0.0);
    for (double g : aux_backward<double>(p, f.cache, zero)) EXPECT_EQ(g, 0.0);
}

TEST(AuxBackward, StaleCacheIsRejected) {
    AuxConfig cfg{16, 1, {4, 6}, 3};
    auto p = init_aux<double>(cfg);
    const std::vector<double> x(cfg.patch_values(), 0.5);
    const auto f = aux_forward<double>(p, x);
    p.values[0] += 1.0;
    const std::vector<double> g(cfg.output_values(), 1.0);
    EXPECT_THROW(aux_backward<double>(p, f.cache, g), StaleCache);
}

TEST(BatchGradient, IsMeanOfPerSampleGradients) {
    AuxConfig cfg{16, 1, {4, 6}, 5};
    const auto p = init_aux<double>(cfg);
    Rng rng(3);
    std::vector<std::vector<double>> xs(4);
    std::vector<std::vector<std::uint8_t>> ys(4);
    std::vector<TrainingPair<double>> pairs;
    for (int i = 0; i < 4; ++i) {
        xs[i].resize(cfg.patch_values());
        for (auto& v : xs[i]) v = rng.normal();
        ys[i].resize(cfg.output_values());
        for (auto& v : ys[i]) v = rng.bernoulli(0.3);
    }
    for (int i = 0; i < 4; ++i) pairs.push_back({xs[i], ys[i]});

    std::vector<double> mean(p.values.size(), 0.0);
    for (int i = 0; i < 4; ++i) {
        const auto f = aux_forward<double>(p, xs[i]);
        std::vector<double> dl(f.logits.size());
        dice_loss<double>(f.logits, ys[i], dl);
        const auto g = aux_backward<double>(p, f.cache, std::span<const double>(dl));
        for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j] / 4.0;
    }
    const auto bg = batch_gradient<double>(p, pairs);
    ASSERT_EQ(bg.grad.size(), mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) EXPECT_NEAR(bg.grad[j], mean[j], 1e-12);
    EXPECT_EQ(bg.losses.size(), 4u);
    EXPECT_THROW(batch_gradient<double>(p, std::span<const TrainingPair<double>>{}), EmptyBatch);
}

TEST(AuxTraining, OverfitsSinglePatch) {
    AuxConfig cfg;
    auto p = init_aux<float>(cfg);
    OptimizerState<float> opt(p.values.size());
    Rng rng(4);
    const auto x = random_patch(rng, cfg);
    const auto y = disc_target(cfg.patch_size);
    const std::array<TrainingPair<float>, 1> pairs{TrainingPair<float>{x, y}};
    double loss = 1.0;
    for (int i = 0; i < 200; ++i) {
        const auto g = batch_gradient<float>(p, pairs);
        adamw_step<float>(p.values, g.grad, opt);
        loss = g.mean_loss;
    }
    EXPECT_LT(batch_gradient<float>(p, pairs).mean_loss, 0.05);
    EXPECT_LT(loss, 0.1);
}

TEST(AdamW, ZeroGradNoDecayIsIdentity) {
    std::vector<double> p{1.0, -2.0, 3.5};
    const std::vector<double> g(3, 0.0);
    OptimizerState<double> st(3, {0.01, 0.9, 0.999, 1e-8, 0.0});
    adamw_step<double>(p, g, st);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.5}));
}

TEST(AdamW, ScalarFirstStepByHand) {
    std::vector<double> p{1.0};
    const std::vector<double> g{1.0};
    OptimizerState<double> st(1, {0.001, 0.9, 0.999, 1e-8, 0.0});
    adamw_step<double>(p, g, st);
    // m = 0.1, v = 0.001; bias-corrected m_hat = 1, v_hat = 1
    const double expected = 1.0 - 0.001 * (1.0 / (1.0 + 1e-8));
    EXPECT_LT(p[0], 1.0);
    EXPECT_NEAR(p[0], expected, 1e-15);
    EXPECT_EQ(st.step, 1u);
}

TEST(AdamW, DecoupledDecayShrinksMultiplicatively) {
    std::vector<double> p{2.0, -4.0};
    const std::vector<double> g(2, 0.0);
    OptimizerState<double> st(2, {0.1, 0.9, 0.999, 1e-8, 0.5});
    adamw_step<double>(p, g, st);
    EXPECT_NEAR(p[0], 2.0 * (1 - 0.05), 1e-15);
    EXPECT_NEAR(p[1], -4.0 * (1 - 0.05), 1e-15);
}

TEST(AdamW, ZeroLearningRateIsIdentity) {
    Rng rng(5);
    std::vector<double> p(20), g(20);
    for (auto& v : p) v = rng.normal();
    for (auto& v : g) v = rng.normal();
    const auto before = p;
    OptimizerState<double> st(20, {0.0, 0.9, 0.999, 1e-8, 0.01});
    for (int i = 0; i < 3; ++i) adamw_step<double>(p, g, st);
    EXPECT_EQ(p, before);
    std::vector<double> shorter(3);
    EXPECT_THROW(adamw_step<double>(shorter, g, st), ShapeMismatch);
}

TEST(Checkpoint, RoundTripAndCorruption) {
    AuxConfig cfg{32, 2, {8, 12}, 9};
    auto p = init_aux<float>(cfg);
    OptimizerState<float> opt(p.values.size(), {0.002, 0.8, 0.99, 1e-7, 0.03});
    Rng rng(6);
    std::vector<float> g(p.values.size());
    for (auto& v : g) v = static_cast<float>(rng.normal());
    adamw_step<float>(p.values, g, opt);

    const auto bytes = serialize_checkpoint(p, opt);
    EXPECT_EQ(bytes.substr(0, 6), "AUXOL1");
    const auto ck = deserialize_checkpoint(bytes);
    EXPECT_EQ(ck.params, p);
    EXPECT_EQ(ck.optimizer, opt);

    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(bytes + "x"), CheckpointError);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint(bad), CheckpointError);

    const auto path = std::filesystem::temp_directory_path() / "auxol_ckpt_test.bin";
    save_checkpoint(path, p, opt);
    EXPECT_EQ(load_checkpoint(path).params, p);
    std::filesystem::remove(path);
}
