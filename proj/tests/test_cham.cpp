#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "semattn/cham.hpp"
#include "semattn/errors.hpp"
#include "semattn/nn/layers.hpp"

using namespace semattn;
using namespace semattn::testing;

namespace {

// Straight-line oracle: pools, two bottleneck passes, sigmoid.
std::vector<double> gate_oracle(const Tensor& f, const ChamParams& p) {
    const int c = f.dim(0), h = f.dim(1), w = f.dim(2), hid = c / p.reduction_ratio;
    std::vector<double> avg(c, 0), mx(c, -1e300), z(c, 0);
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h * w; ++i) {
            avg[ch] += f[ch * h * w + i] / (h * w);
            mx[ch] = std::max(mx[ch], f[ch * h * w + i]);
        }
    }
    for (const auto* v : {&avg, &mx}) {
        for (int o = 0; o < c; ++o) {
            for (int j = 0; j < hid; ++j) {
                double a = 0;
                for (int ch = 0; ch < c; ++ch) a += p.w1[j * c + ch] * (*v)[ch];
                z[o] += p.w2[o * hid + j] * std::max(a, 0.0);
            }
        }
    }
    for (auto& v : z) v = 1 / (1 + std::exp(-v));
    return z;
}

ChamParams random_params(int c, int r, std::uint64_t seed) {
    ChamParams p;
    p.reduction_ratio = r;
    p.w1 = random_tensor({c / r, c}, seed);
    p.w2 = random_tensor({c, c / r}, seed + 1);
    return p;
}

}  // namespace

TEST(Cham, ZeroWeightsGiveExactHalf) {
    ChamParams p;
    p.reduction_ratio = 2;
    p.w1 = Tensor({2, 4});
    p.w2 = Tensor({4, 2});
    const Tensor gate = channel_attention_map(random_tensor({4, 5, 5}, 1, -10, 10), p);
    for (int c = 0; c < 4; ++c) EXPECT_EQ(gate[c], 0.5);
}

TEST(Cham, GateMatchesOracleAndStaysOpen) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ChamParams p = random_params(8, 2, seed * 3);
        const Tensor f = random_tensor({8, 5, 6}, seed * 7 + 1, -3, 3);
        const Tensor gate = channel_attention_map(f, p);
        const auto oracle = gate_oracle(f, p);
        for (int c = 0; c < 8; ++c) {
            EXPECT_GT(gate[c], 0.0);
            EXPECT_LT(gate[c], 1.0);
            EXPECT_NEAR(gate[c], oracle[c], 1e-12);
        }
    }
}

TEST(Cham, ProductMatchesLoopExactly) {
    const Tensor f = random_tensor({3, 4, 5}, 9);
    const Tensor gate = random_tensor({3}, 10, 0, 1);
    const Tensor out = apply_channel_gate(f, gate);
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 20; ++i) EXPECT_EQ(out[c * 20 + i], gate[c] * f[c * 20 + i]);
    }
}

TEST(Cham, ShapeAndRatioErrors) {
    ChamParams p = random_params(8, 2, 1);
    EXPECT_THROW(channel_attention_map(random_tensor({6, 3, 3}, 1), p), ShapeError);
    p.reduction_ratio = 3;
    EXPECT_THROW(channel_attention_map(random_tensor({8, 3, 3}, 1), p), ConfigError);
    nn::Rng rng(0);
    EXPECT_THROW(nn::ChannelAttention(10, 4, rng), ConfigError);
    EXPECT_THROW(apply_channel_gate(random_tensor({3, 2, 2}, 1), Tensor({4})), ShapeError);
}

TEST(Cham, NonFiniteInputRejected) {
    Tensor f = random_tensor({4, 2, 2}, 3);
    f[5] = std::nan("");
    EXPECT_THROW(channel_attention_map(f, random_params(4, 1, 0)), NumericError);
}

TEST(Cham, DefaultReductionRatio) {
    EXPECT_EQ(default_reduction_ratio(64), 16);
    EXPECT_EQ(default_reduction_ratio(16), 16);
    EXPECT_EQ(default_reduction_ratio(12), 1);
}

TEST(Cham, LayerAgreesWithFunctionalForm) {
    nn::Rng rng(4);
    nn::ChannelAttention layer(8, 2, rng);
    const Tensor x = random_tensor({3, 8, 4, 4}, 12);
    const Tensor y = layer.forward(x, nn::Mode::Train);
    for (int n = 0; n < 3; ++n) {
        const Tensor expected = apply_channel_gate(x.sample(n), channel_attention_map(x.sample(n), layer.params()));
        const Tensor got = y.sample(n);
        for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-14);
    }
}

TEST(Cham, ForcedGateIsConstant) {
    nn::Rng rng(4);
    nn::ChannelAttention layer(4, 1, rng);
    layer.force_gate(0.5);
    const Tensor x = random_tensor({1, 4, 3, 3}, 2);
    const Tensor y = layer.forward(x, nn::Mode::Eval);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], 0.5 * x[i]);
}

TEST(Cham, GradientsMatchFiniteDifferences) {
    nn::Rng rng(6);
    nn::ChannelAttention layer(4, 2, rng);
    Tensor x = random_tensor({2, 4, 5, 5}, 21);
    const Tensor r = projection({2, 4, 5, 5}, 22);
    const auto loss = [&] { return dot(layer.forward(x, nn::Mode::Train), r); };
    Tensor gx;
    const auto result = gradcheck(collect(layer), loss, [&] {
        layer.forward(x, nn::Mode::Train);
        gx = layer.backward(r);
    }, 1000, 1);
    EXPECT_LE(result.max_rel, 1e-5) << result.worst;
    const auto in = gradcheck_input(x, gx, loss, 60, 2);
    EXPECT_LE(in.max_rel, 1e-5) << in.worst;
}
