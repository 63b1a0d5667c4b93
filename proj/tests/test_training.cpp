#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "semattn/checkpoint.hpp"
#include "semattn/errors.hpp"
#include "semattn/training.hpp"

using namespace semattn;
using namespace semattn::testing;

namespace {

ModelConfig tiny_config(int k = 3, int l = 5) {
    ModelConfig cfg;
    cfg.rgb.backbone = RgbBackbone::TinyResidual;
    cfg.semantic.num_semantic_classes = l;
    cfg.semantic.channel_plan = {8, 16, 32, 512};
    cfg.fusion.num_scene_classes = k;
    return cfg;
}

}  // namespace

TEST(Loss, NllExample) {
    const Tensor lp = Tensor::from_values({2, 3}, {std::log(0.2), std::log(0.5), std::log(0.3),
                                                   std::log(0.6), std::log(0.3), std::log(0.1)});
    const auto r = train::nll_loss(lp, {1, 0});
    EXPECT_NEAR(r.loss, -(std::log(0.5) + std::log(0.6)) / 2, 1e-15);
    EXPECT_EQ(r.grad[1], -0.5);
    EXPECT_EQ(r.grad[3], -0.5);
    EXPECT_EQ(r.grad[0], 0.0);
}

TEST(Loss, NllRejectsBadInput) {
    Tensor lp({1, 3}, -1.0);
    EXPECT_THROW(train::nll_loss(lp, {3}), RangeError);
    lp[0] = std::nan("");
    EXPECT_THROW(train::nll_loss(lp, {0}), NumericError);
}

TEST(Optimizer, SgdMomentumExample) {
    nn::Parameter p({2}, true);
    p.value[0] = 1.0;
    p.value[1] = -2.0;
    p.grad[0] = 0.5;
    p.grad[1] = 1.0;
    Tensor v({2});
    v[0] = 0.1;
    train::SgdConfig cfg{0.1, 0.9, 0.01};
    train::sgd_momentum_step(p, v, cfg);
    EXPECT_NEAR(v[0], 0.9 * 0.1 + 0.5 + 0.01 * 1.0, 1e-15);
    EXPECT_NEAR(p.value[0], 1.0 - 0.1 * v[0], 1e-15);
    EXPECT_NEAR(v[1], 1.0 - 0.02, 1e-15);
}

TEST(Optimizer, PlainStepExample) {
    nn::Parameter p({1}, true);
    p.value[0] = 1.0;
    p.grad[0] = 1.0;
    Tensor v({1});
    train::sgd_momentum_step(p, v, {0.1, 0.0, 0.0});
    EXPECT_DOUBLE_EQ(p.value[0], 0.9);
}

TEST(Optimizer, MomentumUnrollExample) {
    nn::Parameter p({1}, true);
    p.grad[0] = 1.0;
    Tensor v({1});
    train::sgd_momentum_step(p, v, {0.1, 0.9, 0.0});
    EXPECT_DOUBLE_EQ(p.value[0], -0.1);
    train::sgd_momentum_step(p, v, {0.1, 0.9, 0.0});
    EXPECT_DOUBLE_EQ(p.value[0], -0.29);
}

TEST(Optimizer, NoDecayOnBiases) {
    nn::Parameter p({1}, false);
    p.value[0] = 3.0;
    Tensor v({1});
    train::sgd_momentum_step(p, v, {0.1, 0.9, 0.5});
    EXPECT_EQ(p.value[0], 3.0);
}

TEST(Optimizer, StateRoundTrips) {
    nn::Parameter p({3}, true);
    p.grad.fill(1.0);
    train::SgdMomentum a({0.1, 0.9, 0.0});
    a.step({{"w", &p}});
    train::SgdMomentum b({0.1, 0.9, 0.0});
    b.load_state(a.state());
    nn::Parameter q = p;
    a.step({{"w", &p}});
    b.step({{"w", &q}});
    for (int i = 0; i < 3; ++i) EXPECT_EQ(p.value[i], q.value[i]);
}

TEST(Schedule, StepDecay) {
    train::TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.lr_step_epochs = 2;
    cfg.lr_gamma = 0.5;
    // Epochs count from 1.
    EXPECT_DOUBLE_EQ(train::learning_rate_at(cfg, 1), 0.1);
    EXPECT_DOUBLE_EQ(train::learning_rate_at(cfg, 2), 0.1);
    EXPECT_DOUBLE_EQ(train::learning_rate_at(cfg, 3), 0.05);
    EXPECT_DOUBLE_EQ(train::learning_rate_at(cfg, 6), 0.025);
}

TEST(Schedule, InvalidConfigRejected) {
    train::TrainConfig cfg;
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.optimizer = "adam";
    EXPECT_THROW(train::make_optimizer(cfg), ConfigError);
}

TEST(Checkpoint, RoundTripPreservesEveryTensor) {
    SceneModel model(tiny_config(), 3);
    Checkpoint ckpt;
    ckpt.model_config = model.config();
    ckpt.stage = "fusion";
    ckpt.seed = 3;
    ckpt.extra = {{"note", "x"}};
    store_groups(model, ckpt, {"rgb", "semantic", "fusion"});
    const Checkpoint back = decode_checkpoint(encode_checkpoint(ckpt));
    EXPECT_EQ(back.stage, "fusion");
    EXPECT_EQ(back.extra, ckpt.extra);
    ASSERT_EQ(back.tensors.size(), ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
        const Tensor& u = back.tensors.at(name);
        ASSERT_EQ(u.shape(), t.shape()) << name;
        for (std::size_t i = 0; i < t.numel(); ++i) ASSERT_EQ(u[i], t[i]) << name;
    }
    SceneModel other(tiny_config(), 4);
    load_groups(other, back, {"rgb", "semantic", "fusion"});
    EXPECT_EQ(state_hash(other, {"rgb", "semantic", "fusion"}), state_hash(model, {"rgb", "semantic", "fusion"}));
}

TEST(Checkpoint, CorruptionDetected) {
    SceneModel model(tiny_config(), 3);
    Checkpoint ckpt;
    ckpt.model_config = model.config();
    store_groups(model, ckpt, {"fusion"});
    const std::string bytes = encode_checkpoint(ckpt);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 8)), FormatError);
    EXPECT_THROW(decode_checkpoint("NOTACKPT" + bytes.substr(8)), FormatError);
    SceneModel other(tiny_config(), 3);
    EXPECT_THROW(load_groups(other, ckpt, {"rgb"}), FormatError);
}

TEST(Checkpoint, ShapeMismatchRejected) {
    SceneModel small(tiny_config(3), 1);
    Checkpoint ckpt;
    ckpt.model_config = small.config();
    store_groups(small, ckpt, {"fusion"});
    SceneModel bigger(tiny_config(5), 1);
    EXPECT_THROW(load_groups(bigger, ckpt, {"fusion"}), FormatError);
}

TEST(Model, EndToEndGradientsOnTinyModel) {
    ModelConfig cfg = tiny_config(3, 4);
    cfg.fusion.dropout_p = 0.0;
    SceneModel model(cfg, 11);
    const Tensor rgb = random_tensor({2, 3, 224, 224}, 1, 0, 1);
    const Tensor sem = random_tensor({2, 4, 224, 224}, 2, 0, 1);
    const std::vector<int> targets{0, 2};
    std::vector<std::pair<std::string, nn::Parameter*>> params;
    model.visit_parameters([&](const std::string& n, nn::Parameter& p) {
        if (n.rfind("rgb_head", 0) != 0 && n.rfind("semantic_head", 0) != 0) params.emplace_back(n, &p);
    });
    const auto loss = [&] { return train::nll_loss(model.forward(rgb, sem, nn::Mode::Train), targets).loss; };
    const auto result = gradcheck(params, loss, [&] {
        const auto r = train::nll_loss(model.forward(rgb, sem, nn::Mode::Train), targets);
        model.backward(r.grad);
    }, 1, 1);
    EXPECT_LE(result.max_rel, 1e-4) << result.worst;
}

TEST(Training, FusionWithoutBranchesIsDependencyError) {
    train::TrainConfig cfg;
    cfg.stage = train::Stage::Fusion;
    data::Sample s;
    s.image = data::RgbImage(224, 224, 0.5F);
    s.semantics = data::SemanticScoreTensor(224, 224, 5);
    EXPECT_THROW(train::train_stage(cfg, tiny_config(), {s}), DependencyError);
    EXPECT_THROW(train::train_stage(cfg, tiny_config(), {}), ConfigError);
}

TEST(Training, StageNames) {
    EXPECT_EQ(train::parse_stage("rgb"), train::Stage::BranchRgb);
    EXPECT_EQ(train::parse_stage("branch_semantic"), train::Stage::BranchSemantic);
    EXPECT_EQ(train::to_string(train::Stage::Fusion), "fusion");
    EXPECT_THROW(train::parse_stage("joint"), ConfigError);
}
