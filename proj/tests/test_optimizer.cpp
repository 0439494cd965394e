#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "smpconv/errors.hpp"
#include "smpconv/experiments.hpp"
#include "smpconv/optimizer.hpp"

using namespace smp;

namespace {

TrainConfig sgd(double lr) {
    TrainConfig c;
    c.optimizer_kind = OptimizerKind::sgd;
    c.base_lr = lr;
    return c;
}

const std::vector<Interval> kSquare{{-1.0, 1.0}, {-1.0, 1.0}};

}  // namespace

TEST(TrainConfig, Validation) {
    EXPECT_NO_THROW(TrainConfig{}.validate());
    TrainConfig c;
    c.base_lr = 0.0;
    EXPECT_THROW(c.validate(), ContractError);
    c = {};
    c.radius_min = 2.0;
    EXPECT_THROW(c.validate(), ContractError);
    c = {};
    c.weight_decay = -1.0;
    EXPECT_THROW(c.validate(), ContractError);
}

TEST(TrainConfig, JsonRoundTripAndStrictKeys) {
    TrainConfig c;
    c.base_lr = 0.003;
    c.optimizer_kind = OptimizerKind::sgd;
    c.steps = 17;
    c.seed = 99;
    const TrainConfig back = train_config_from_json(to_json(c));
    EXPECT_EQ(back.base_lr, 0.003);
    EXPECT_EQ(back.optimizer_kind, OptimizerKind::sgd);
    EXPECT_EQ(back.steps, 17u);
    EXPECT_EQ(back.seed, 99u);
    nlohmann::json doc = to_json(c);
    doc["learning_rate"] = 1.0;
    EXPECT_THROW(train_config_from_json(doc), ContractError);
    doc = to_json(c);
    doc["base_lr"] = "fast";
    EXPECT_THROW(train_config_from_json(doc), ContractError);
    EXPECT_THROW(parse_optimizer_kind("rmsprop"), ContractError);
}

TEST(DefaultRadius, Heuristic) {
    EXPECT_NEAR(default_radius(33, 2), 2.0 / 33.0 * 2.0, 1e-15);
    EXPECT_NEAR(default_radius(33, 2), 0.1212, 1e-4);
    EXPECT_NEAR(default_radius(51, 1), 2.0 / 51.0, 1e-15);
}

TEST(InitSmp, DeterministicPerSeed) {
    const SmpFilter a = init_smp(20, 2, 3, 0.3, kSquare, 0.1, 7);
    const SmpFilter b = init_smp(20, 2, 3, 0.3, kSquare, 0.1, 7);
    const SmpFilter c = init_smp(20, 2, 3, 0.3, kSquare, 0.1, 8);
    EXPECT_EQ(a, b);
    EXPECT_NE(a.positions()[0], c.positions()[0]);
}

TEST(InitSmp, ShapesRadiiAndDomain) {
    const std::vector<Interval> causal{{-1.0, 0.0}};
    const SmpFilter f = init_smp(500, 1, 2, 0.5, causal, 0.05, 3);
    EXPECT_EQ(f.n_points(), 500u);
    EXPECT_EQ(f.weights().size(), 1000u);
    for (std::size_t i = 0; i < f.n_points(); ++i) {
        EXPECT_EQ(f.radius(i), 0.05);
        EXPECT_GT(f.position(i)[0], -1.0);
        EXPECT_LT(f.position(i)[0], 0.0);
    }
}

TEST(InitSmp, SmallSigmaConcentratesNearOrigin) {
    const std::vector<Interval> line{{-1.0, 1.0}};
    const SmpFilter f = init_smp(2000, 1, 1, 0.1, line, 0.1, 1);
    double sum = 0.0, sq = 0.0;
    for (double p : f.positions()) {
        sum += p;
        sq += p * p;
    }
    const double n = 2000.0;
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_LE(sd, 0.1 * 1.05);
    EXPECT_NEAR(sum / n, 0.0, 0.01);
}

TEST(InitSmp, WeightScale) {
    const SmpFilter f = init_smp(4000, 2, 1, 0.3, kSquare, 0.1, 2);
    double sq = 0.0;
    for (double w : f.weights()) sq += w * w;
    EXPECT_NEAR(std::sqrt(sq / 4000.0), 1.0 / std::sqrt(4000.0), 0.05 / std::sqrt(4000.0));
}

TEST(InitSmp, RejectsBadArguments) {
    EXPECT_THROW(init_smp(0, 2, 1, 0.3, kSquare, 0.1, 0), ContractError);
    EXPECT_THROW(init_smp(4, 2, 1, 0.3, kSquare, 5.0, 0), ContractError);
    EXPECT_THROW(init_smp(4, 2, 1, -0.3, kSquare, 0.1, 0), ContractError);
    const std::vector<Interval> off{{0.5, 1.0}};
    EXPECT_THROW(init_smp(4, 1, 1, 0.3, off, 0.1, 0), ContractError);
}

TEST(SmpOptimizer, HandComputedSgdStep) {
    SmpFilter f(1, 1, {0.2}, {1.0}, {0.5});
    SmpGradients g = SmpGradients::zeros_like(f);
    g.d_positions[0] = 2.0;
    g.d_weights[0] = -1.0;
    g.d_radii[0] = 3.0;
    SmpOptimizer opt(sgd(0.1), std::span<const SmpFilter>(&f, 1));
    opt.step(std::span<SmpFilter>(&f, 1), std::span<const SmpGradients>(&g, 1));
    EXPECT_NEAR(f.positions()[0], 0.2 - 0.1 * 2.0, 1e-15);
    EXPECT_NEAR(f.weights()[0], 1.0 + 0.1, 1e-15);
    EXPECT_NEAR(f.radius(0), 0.5 - 0.01 * 3.0, 1e-15);  // radius lr = 0.1 * 0.1
}

TEST(SmpOptimizer, HandComputedAdamFirstStep) {
    // First bias-corrected Adam step moves every parameter by lr * sign(g).
    SmpFilter f(1, 1, {0.2}, {1.0}, {0.5});
    SmpGradients g = SmpGradients::zeros_like(f);
    g.d_positions[0] = 0.3;
    g.d_weights[0] = -7.0;
    g.d_radii[0] = 1.0;
    TrainConfig c;
    c.base_lr = 0.01;
    SmpOptimizer opt(c, std::span<const SmpFilter>(&f, 1));
    opt.step(std::span<SmpFilter>(&f, 1), std::span<const SmpGradients>(&g, 1));
    EXPECT_NEAR(f.positions()[0], 0.2 - 0.01, 1e-9);
    EXPECT_NEAR(f.weights()[0], 1.0 + 0.01, 1e-9);
    EXPECT_NEAR(f.radius(0), 0.5 - 0.001, 1e-9);
}

TEST(SmpOptimizer, ProjectsRadii) {
    SmpFilter f(1, 1, {0.0, 0.1}, {1.0, 1.0}, {0.9, 0.001});
    SmpGradients g = SmpGradients::zeros_like(f);
    g.d_radii = {-1000.0, 1000.0};
    SmpOptimizer opt(sgd(1.0), std::span<const SmpFilter>(&f, 1));
    opt.step(std::span<SmpFilter>(&f, 1), std::span<const SmpGradients>(&g, 1));
    EXPECT_EQ(f.radius(0), 1.0);
    EXPECT_EQ(f.radius(1), 1e-4);
}

TEST(SmpOptimizer, MaskFreezesGroups) {
    SmpFilter f(1, 1, {0.2}, {1.0}, {0.5});
    const SmpFilter before = f;
    SmpGradients g = SmpGradients::zeros_like(f);
    g.d_positions[0] = g.d_weights[0] = g.d_radii[0] = 1.0;
    SmpOptimizer opt(sgd(0.1), std::span<const SmpFilter>(&f, 1));
    opt.step(std::span<SmpFilter>(&f, 1), std::span<const SmpGradients>(&g, 1),
             trainable_mask(FitMode::frozen));
    EXPECT_EQ(f.positions()[0], before.positions()[0]);
    EXPECT_EQ(f.radius(0), before.radius(0));
    EXPECT_NE(f.weights()[0], before.weights()[0]);
}

TEST(SmpOptimizer, ZeroGradientIsFixedPoint) {
    std::mt19937_64 rng(3);
    SmpFilter f = oracle::random_filter(5, 2, 2, rng);
    const SmpFilter before = f;
    const SmpGradients g = SmpGradients::zeros_like(f);
    SmpOptimizer opt(TrainConfig{}, std::span<const SmpFilter>(&f, 1));
    for (int s = 0; s < 5; ++s) opt.step(std::span<SmpFilter>(&f, 1), std::span<const SmpGradients>(&g, 1));
    EXPECT_EQ(f, before);
}

TEST(SmpOptimizer, NanGradientIsReported) {
    SmpFilter f(1, 1, {0.2}, {1.0}, {0.5});
    SmpGradients g = SmpGradients::zeros_like(f);
    g.d_radii[0] = std::nan("");
    SmpOptimizer opt(TrainConfig{}, std::span<const SmpFilter>(&f, 1));
    try {
        opt.step(std::span<SmpFilter>(&f, 1), std::span<const SmpGradients>(&g, 1));
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("radii"), std::string::npos);
    }
}

TEST(SmpOptimizer, RejectsMismatchedBounds) {
    SmpFilter f(1, 1, {0.2}, {1.0}, {0.5}, RadiusBounds{1e-3, 1.0});
    EXPECT_THROW(SmpOptimizer(TrainConfig{}, std::span<const SmpFilter>(&f, 1)), ContractError);
}

TEST(SmpOptimizer, TenStepsReduceLoss) {
    const TargetFunction target = TargetFunction::sample(TargetKind::sine_product, 21);
    FitConfig config;
    config.n_points = 40;
    config.sigma = 0.5;
    config.r_init = 0.3;
    config.train.steps = 10;
    const FitResult r = fit_function(target, config);
    EXPECT_LT(r.report.final_mse, r.report.mse_trace.front());
}

TEST(DenseOptimizer, SgdWithWeightDecay) {
    TrainConfig c = sgd(0.5);
    c.weight_decay = 0.1;
    DenseOptimizer opt(c);
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.2, 0.0};
    const std::vector<std::span<double>> ps{p};
    const std::vector<std::span<const double>> gs{g};
    opt.step(ps, gs);
    EXPECT_NEAR(p[0], 1.0 - 0.5 * (0.2 + 0.1), 1e-15);
    EXPECT_NEAR(p[1], -2.0 - 0.5 * (-0.2), 1e-15);
}
