#include <gtest/gtest.h>

#include <numeric>

#include "gradcheck.hpp"
#include "semattn/data/transforms.hpp"
#include "semattn/errors.hpp"
#include "semattn/interpretability.hpp"

using namespace semattn;
using namespace semattn::interp;
using semattn::testing::random_tensor;

TEST(Cam, WeightedChannelSumExample) {
    const Tensor f = Tensor::from_values({2, 1, 2}, {1, 2, 3, 4});
    const Tensor w = Tensor::from_values({2, 2}, {0.5, -1, 2, 1});
    const auto s = weighted_channel_sum(f, w, 0);
    EXPECT_DOUBLE_EQ(s[0], 0.5 - 3);
    EXPECT_DOUBLE_EQ(s[1], 1 - 4);
    EXPECT_DOUBLE_EQ(weighted_channel_sum(f, w, 1)[1], 8);
}

TEST(Cam, RangeAndPeak) {
    Tensor f({1, 7, 7});
    f[3 * 7 + 3] = 1.0;
    const ActivationMap cam = compute_cam(f, Tensor({1, 1}, 2.0), 0);
    EXPECT_EQ(cam.height, 224);
    const auto [lo, hi] = std::minmax_element(cam.values.begin(), cam.values.end());
    EXPECT_EQ(*lo, 0.0);
    EXPECT_EQ(*hi, 1.0);
    EXPECT_EQ(cam.at(112, 112), 1.0);
}

TEST(Cam, ConstantMapBecomesZeros) {
    const ActivationMap cam = compute_cam(Tensor({2, 7, 7}, 1.0), Tensor({1, 2}, 1.0), 0, 16);
    for (double v : cam.values) EXPECT_EQ(v, 0.0);
}

TEST(Cam, BadClassOrShapeRejected) {
    EXPECT_THROW(compute_cam(Tensor({2, 7, 7}), Tensor({3, 2}), 3), RangeError);
    EXPECT_THROW(compute_cam(Tensor({2, 7, 7}), Tensor({3, 4}), 0), ShapeError);
}

TEST(Cam, AccumulationConservesMass) {
    const ActivationMap cam = compute_cam(random_tensor({4, 7, 7}, 1), random_tensor({2, 4}, 2), 1);
    Tensor dense({5, 224, 224});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : dense.values()) v = u(rng);
    const auto sem = data::sparsify(dense);
    ObjectSceneCorrelation acc(5);
    accumulate_object_attention(cam, sem, acc);
    accumulate_object_attention(cam, sem, acc);
    const double total = std::accumulate(cam.values.begin(), cam.values.end(), 0.0);
    EXPECT_NEAR(std::accumulate(acc.attention.begin(), acc.attention.end(), 0.0), 2 * total, 1e-6);
    EXPECT_NEAR(acc.total_mass, 2 * total, 1e-6);
    EXPECT_EQ(acc.sample_count, 2);
}

TEST(Cam, AccumulationNeedsAlignment) {
    const ActivationMap cam = compute_cam(random_tensor({1, 7, 7}, 1), Tensor({1, 1}, 1.0), 0);
    ObjectSceneCorrelation acc(3);
    EXPECT_THROW(accumulate_object_attention(cam, data::SemanticScoreTensor(200, 200, 3), acc), ShapeError);
}

TEST(Cam, ReportSortsAndNormalises) {
    ObjectSceneCorrelation acc(4);
    acc.attention = {1.0, 3.0, 0.0, 3.0};
    const auto report = emit_correlation_report(acc, {"a", "b", "c", "d"}, {"both", "indoor", "outdoor", "both"});
    ASSERT_EQ(report.size(), 4U);
    EXPECT_EQ(report[0].label, 1);
    EXPECT_EQ(report[1].label, 3);
    EXPECT_EQ(report[2].label_name, "a");
    EXPECT_DOUBLE_EQ(report[0].weight, 3.0 / 7.0);
    EXPECT_EQ(report[0].group, "indoor");
    EXPECT_THROW(emit_correlation_report(ObjectSceneCorrelation(2), {}, {}), RangeError);
}

TEST(Cam, MergeAddsBins) {
    ObjectSceneCorrelation a(2), b(2);
    a.attention = {1, 2};
    b.attention = {3, 4};
    b.sample_count = 1;
    a.merge(b);
    EXPECT_EQ(a.attention[1], 6);
    EXPECT_EQ(a.sample_count, 1);
    EXPECT_THROW(a.merge(ObjectSceneCorrelation(3)), ShapeError);
}

TEST(Cam, BinaryRoundTripAtFloatPrecision) {
    const ActivationMap cam = compute_cam(random_tensor({3, 7, 7}, 5), random_tensor({2, 3}, 6), 0, 32);
    const ActivationMap back = decode_cam(encode_cam(cam));
    ASSERT_EQ(back.values.size(), cam.values.size());
    for (std::size_t i = 0; i < cam.values.size(); ++i) EXPECT_EQ(back.values[i], static_cast<float>(cam.values[i]));
    EXPECT_THROW(decode_cam(encode_cam(cam).substr(0, 20)), FormatError);
}

TEST(Cam, RenderersProducePng) {
    const ActivationMap cam = compute_cam(random_tensor({3, 7, 7}, 5), random_tensor({2, 3}, 6), 0, 32);
    const std::string png = render_overlay_png(cam, data::RgbImage(32, 32, 0.5F));
    EXPECT_EQ(png.substr(1, 3), "PNG");
    EXPECT_THROW(render_overlay_png(cam, data::RgbImage(16, 16)), ShapeError);
    ObjectSceneCorrelation acc(2);
    acc.attention = {1, 2};
    EXPECT_EQ(render_bar_chart_png(emit_correlation_report(acc, {}, {})).substr(1, 3), "PNG");
}
