#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "semattn/attention_fusion.hpp"
#include "semattn/errors.hpp"

using namespace semattn;
using namespace semattn::testing;

namespace {

FusionConfig config(FusionMechanism m, ConvPlan plan = ConvPlan::Two3x3) {
    FusionConfig cfg;
    cfg.mechanism = m;
    cfg.conv_plan = plan;
    cfg.num_scene_classes = 4;
    return cfg;
}

}  // namespace

TEST(Fusion, FuseExamples) {
    const Tensor a = Tensor::from_values({1, 2, 1, 1}, {2.0, 3.0});
    const Tensor b = Tensor::from_values({1, 2, 1, 1}, {5.0, -1.0});
    const Tensor add = fuse(a, b, FusionMechanism::Additive);
    EXPECT_EQ(add[0], 7.0);
    EXPECT_EQ(add[1], 2.0);
    const Tensor had = fuse(a, b, FusionMechanism::Hadamard);
    EXPECT_EQ(had[0], 10.0);
    EXPECT_EQ(had[1], -3.0);
    const Tensor cat = fuse(a, b, FusionMechanism::Concat);
    EXPECT_EQ(cat.shape(), (std::vector<int>{1, 4, 1, 1}));
    EXPECT_EQ(cat[2], 5.0);
}

TEST(Fusion, FuseRejectsMismatchedOperands) {
    EXPECT_THROW(fuse(Tensor({1, 2, 3, 3}), Tensor({1, 2, 2, 2}), FusionMechanism::Hadamard), ShapeError);
    EXPECT_THROW(fuse(Tensor({1, 2, 3, 3}), Tensor({1, 4, 2, 2}), FusionMechanism::Concat), ShapeError);
    EXPECT_THROW(fuse(Tensor({2, 3}), Tensor({2, 3}), FusionMechanism::Additive), ShapeError);
}

TEST(Fusion, AdapterShapesFollowConvPlan) {
    EXPECT_EQ(adapter_output_shape(ConvPlan::None, 512, 7, 7), (std::vector<int>{512, 7, 7}));
    EXPECT_EQ(adapter_output_shape(ConvPlan::Two1x1, 512, 7, 7), (std::vector<int>{1024, 7, 7}));
    EXPECT_EQ(adapter_output_shape(ConvPlan::Two3x3, 512, 7, 7), (std::vector<int>{1024, 3, 3}));
    EXPECT_EQ(adapter_output_shape(ConvPlan::Three3x3, 512, 7, 7), (std::vector<int>{1024, 1, 1}));
}

TEST(Fusion, DefaultPlanShapeChain) {
    nn::Rng rng(0);
    AttentionFusion fusion(config(FusionMechanism::GatedRgbHadamard), 512, 512, rng, 1);
    const Tensor f_i = random_tensor({2, 512, 7, 7}, 1, 0, 1), f_m = random_tensor({2, 512, 7, 7}, 2, 0, 1);
    const Tensor first = fusion.rgb_adapter().at(0).forward(f_i, nn::Mode::Eval);
    EXPECT_EQ(first.shape(), (std::vector<int>{2, 512, 5, 5}));
    const Tensor y = fusion.forward(f_i, f_m, nn::Mode::Eval);
    EXPECT_EQ(fusion.last_fused().shape(), (std::vector<int>{2, 1024, 3, 3}));
    EXPECT_EQ(y.shape(), (std::vector<int>{2, 4}));
}

TEST(Fusion, GatedOperandLiesInUnitInterval) {
    nn::Rng rng(0);
    AttentionFusion fusion(config(FusionMechanism::GatedRgbHadamard, ConvPlan::None), 8, 8, rng, 1);
    fusion.forward(random_tensor({2, 8, 3, 3}, 1), random_tensor({2, 8, 3, 3}, 2, -20, 20), nn::Mode::Eval);
    for (Scalar v : fusion.last_sem_operand().values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Fusion, UngatedVariantsEqualPlainHadamard) {
    const Tensor f_i = random_tensor({2, 8, 5, 5}, 3), f_m = random_tensor({2, 8, 5, 5}, 4);
    for (auto gated : {FusionMechanism::GatedRgbHadamard, FusionMechanism::GatedSemHadamard}) {
        nn::Rng r1(7), r2(7);
        AttentionFusion plain(config(FusionMechanism::Hadamard, ConvPlan::Two1x1), 8, 8, r1, 1);
        AttentionFusion hooked(config(gated, ConvPlan::Two1x1), 8, 8, r2, 1);
        hooked.hooks().gate_sigmoid = false;
        const Tensor a = plain.forward(f_i, f_m, nn::Mode::Eval);
        const Tensor b = hooked.forward(f_i, f_m, nn::Mode::Eval);
        for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
    }
}

TEST(Fusion, ConcatDoublesClassifierWidth) {
    nn::Rng rng(0);
    AttentionFusion fusion(config(FusionMechanism::Concat), 512, 512, rng, 1);
    EXPECT_EQ(fusion.fused_channels(), 2048);
    EXPECT_EQ(fusion.classifier().weight().value.shape(), (std::vector<int>{4, 2048}));
}

TEST(Fusion, MismatchedWidthsNeedConcat) {
    nn::Rng rng(0);
    EXPECT_THROW(AttentionFusion(config(FusionMechanism::Hadamard, ConvPlan::None), 8, 16, rng, 1), ConfigError);
    EXPECT_NO_THROW(AttentionFusion(config(FusionMechanism::Concat, ConvPlan::None), 8, 16, rng, 1));
}

TEST(Fusion, GradientsForEveryMechanism) {
    for (auto m : all_mechanisms()) {
        nn::Rng rng(5);
        FusionConfig cfg = config(m, ConvPlan::Two3x3);
        cfg.dropout_p = 0.0;
        AttentionFusion fusion(cfg, 4, 4, rng, 1);
        Tensor f_i = random_tensor({2, 4, 5, 5}, 6), f_m = random_tensor({2, 4, 5, 5}, 7);
        const Tensor r = projection({2, 4}, 8);
        const auto loss = [&] { return dot(fusion.forward(f_i, f_m, nn::Mode::Train), r); };
        AttentionFusion::InputGrads grads;
        const auto result = gradcheck(collect(fusion), loss, [&] {
            fusion.forward(f_i, f_m, nn::Mode::Train);
            grads = fusion.backward(r);
        }, 15, 1);
        EXPECT_LE(result.max_rel, 1e-4) << to_string(m) << " " << result.worst;
        EXPECT_LE(gradcheck_input(f_i, grads.rgb, loss, 15, 2).max_rel, 1e-4) << to_string(m);
        EXPECT_LE(gradcheck_input(f_m, grads.semantic, loss, 15, 3).max_rel, 1e-4) << to_string(m);
    }
}
