#include "semattn/cham.hpp"

#include <cmath>
#include <string>

#include "semattn/errors.hpp"
#include "semattn/nn/layers.hpp"

namespace semattn {

namespace {

struct Squeeze {
    std::vector<Scalar> avg, max;
    std::vector<std::size_t> argmax;  // offset within the sample
};

// Spatial average and max per channel of one CHW block starting at `x`.
Squeeze squeeze(const Scalar* x, int channels, std::size_t plane) {
    Squeeze s{std::vector<Scalar>(channels), std::vector<Scalar>(channels), std::vector<std::size_t>(channels)};
    for (int c = 0; c < channels; ++c) {
        const Scalar* p = x + static_cast<std::size_t>(c) * plane;
        Scalar sum = 0;
        Scalar best = p[0];
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            sum += p[i];
            if (p[i] > best) {
                best = p[i];
                best_i = i;
            }
        }
        s.avg[c] = sum / static_cast<Scalar>(plane);
        s.max[c] = best;
        s.argmax[c] = static_cast<std::size_t>(c) * plane + best_i;
    }
    return s;
}

// hidden = w1 * v (pre-activation), out += w2 * relu(hidden).
void bottleneck(const Scalar* w1, const Scalar* w2, int channels, int hidden, const std::vector<Scalar>& v,
                Scalar* pre, std::vector<Scalar>& out) {
    for (int h = 0; h < hidden; ++h) {
        Scalar acc = 0;
        const Scalar* row = w1 + static_cast<std::size_t>(h) * channels;
        for (int c = 0; c < channels; ++c) acc += row[c] * v[c];
        pre[h] = acc;
    }
    for (int c = 0; c < channels; ++c) {
        Scalar acc = 0;
        const Scalar* row = w2 + static_cast<std::size_t>(c) * hidden;
        for (int h = 0; h < hidden; ++h) acc += row[h] * (pre[h] > 0 ? pre[h] : 0);
        out[c] += acc;
    }
}

}  // namespace

void ChamParams::validate() const {
    if (reduction_ratio < 1) throw ConfigError("ChAM reduction ratio must be positive");
    require_rank(w1, 2, "ChAM w1");
    const int c = w1.dim(1);
    if (c % reduction_ratio != 0) {
        throw ConfigError("ChAM channel count " + std::to_string(c) + " not divisible by ratio " +
                          std::to_string(reduction_ratio));
    }
    require_shape(w1, {c / reduction_ratio, c}, "ChAM w1");
    require_shape(w2, {c, c / reduction_ratio}, "ChAM w2");
}

int default_reduction_ratio(int channels) { return channels >= 16 ? 16 : 1; }

Tensor channel_attention_map(const Tensor& features, const ChamParams& params) {
    params.validate();
    require_rank(features, 3, "channel_attention_map input");
    const int c = features.dim(0);
    if (c != params.channels()) {
        throw ShapeError("channel_attention_map: feature has " + std::to_string(c) + " channels, params expect " +
                         std::to_string(params.channels()));
    }
    if (!features.all_finite()) throw NumericError("channel_attention_map: non-finite input feature map");
    const std::size_t plane = static_cast<std::size_t>(features.dim(1)) * features.dim(2);
    const int hidden = c / params.reduction_ratio;
    const Squeeze s = squeeze(features.data(), c, plane);
    std::vector<Scalar> z(c, 0);
    std::vector<Scalar> pre(hidden);
    bottleneck(params.w1.data(), params.w2.data(), c, hidden, s.avg, pre.data(), z);
    bottleneck(params.w1.data(), params.w2.data(), c, hidden, s.max, pre.data(), z);
    for (Scalar v : z) {
        if (!std::isfinite(v)) throw NumericError("channel_attention_map: non-finite pre-sigmoid activation");
    }
    Tensor gate({c});
    for (int i = 0; i < c; ++i) gate[i] = nn::sigmoid(z[i]);
    return gate;
}

Tensor apply_channel_gate(const Tensor& features, const Tensor& gate) {
    require_rank(features, 3, "apply_channel_gate input");
    const int c = features.dim(0);
    if (gate.rank() != 1 || gate.dim(0) != c) {
        throw ShapeError("apply_channel_gate: gate " + gate.shape_str() + " does not match " + features.shape_str());
    }
    const std::size_t plane = static_cast<std::size_t>(features.dim(1)) * features.dim(2);
    Tensor out = features;
    for (int ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] *= gate[ch];
    }
    return out;
}

namespace nn {

ChannelAttention::ChannelAttention(int channels, int reduction_ratio, Rng& rng)
    : channels_(channels),
      ratio_(reduction_ratio),
      hidden_(reduction_ratio > 0 ? channels / reduction_ratio : 0),
      w1_({hidden_, channels}, true),
      w2_({channels, hidden_}, true) {
    if (reduction_ratio < 1 || channels % reduction_ratio != 0) {
        throw ConfigError("ChAM channel count " + std::to_string(channels) + " not divisible by ratio " +
                          std::to_string(reduction_ratio));
    }
    uniform_fill(w1_.value, 1.0 / std::sqrt(static_cast<Scalar>(channels)), rng);
    uniform_fill(w2_.value, 1.0 / std::sqrt(static_cast<Scalar>(hidden_)), rng);
}

void ChannelAttention::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    fn(join_name(prefix, "w1"), w1_);
    fn(join_name(prefix, "w2"), w2_);
}

ChamParams ChannelAttention::params() const { return ChamParams{w1_.value, w2_.value, ratio_}; }

void ChannelAttention::set_params(const ChamParams& params) {
    params.validate();
    require_shape(params.w1, w1_.value.shape(), "ChannelAttention::set_params w1");
    w1_.value = params.w1;
    w2_.value = params.w2;
}

Tensor ChannelAttention::forward(const Tensor& x, Mode /*mode*/) {
    require_rank(x, 4, "ChAM input");
    if (x.dim(1) != channels_) throw ShapeError("ChAM expects " + std::to_string(channels_) + " channels, got " + x.shape_str());
    if (!x.all_finite()) throw NumericError("ChAM: non-finite input feature map");
    const int batch = x.dim(0);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const std::size_t sample = plane * channels_;
    input_ = x;
    gate_ = Tensor({batch, channels_});
    pooled_avg_ = Tensor({batch, channels_});
    pooled_max_ = Tensor({batch, channels_});
    hidden_avg_ = Tensor({batch, hidden_});
    hidden_max_ = Tensor({batch, hidden_});
    argmax_.assign(static_cast<std::size_t>(batch) * channels_, 0);
    Tensor out(x.shape());
    for (int n = 0; n < batch; ++n) {
        const Squeeze s = squeeze(x.data() + n * sample, channels_, plane);
        std::vector<Scalar> z(channels_, 0);
        bottleneck(w1_.value.data(), w2_.value.data(), channels_, hidden_, s.avg,
                   hidden_avg_.data() + static_cast<std::size_t>(n) * hidden_, z);
        bottleneck(w1_.value.data(), w2_.value.data(), channels_, hidden_, s.max,
                   hidden_max_.data() + static_cast<std::size_t>(n) * hidden_, z);
        for (int c = 0; c < channels_; ++c) {
            const std::size_t nc = static_cast<std::size_t>(n) * channels_ + c;
            if (!std::isfinite(z[c])) throw NumericError("ChAM: non-finite pre-sigmoid activation");
            const Scalar g = forced_gate_ ? *forced_gate_ : sigmoid(z[c]);
            gate_[nc] = g;
            pooled_avg_[nc] = s.avg[c];
            pooled_max_[nc] = s.max[c];
            argmax_[nc] = n * sample + s.argmax[c];
            const Scalar* src = x.data() + n * sample + static_cast<std::size_t>(c) * plane;
            Scalar* dst = out.data() + n * sample + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = g * src[i];
        }
    }
    return out;
}

Tensor ChannelAttention::backward(const Tensor& grad_out) {
    if (!grad_out.same_shape(input_)) throw ShapeError("ChAM grad shape mismatch");
    const int batch = input_.dim(0);
    const std::size_t plane = static_cast<std::size_t>(input_.dim(2)) * input_.dim(3);
    const std::size_t sample = plane * channels_;
    Tensor grad_in(input_.shape());
    std::vector<Scalar> dz(channels_), dh_avg(hidden_), dh_max(hidden_);
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels_; ++c) {
            const std::size_t nc = static_cast<std::size_t>(n) * channels_ + c;
            const Scalar g = gate_[nc];
            const Scalar* x = input_.data() + n * sample + static_cast<std::size_t>(c) * plane;
            const Scalar* gy = grad_out.data() + n * sample + static_cast<std::size_t>(c) * plane;
            Scalar* gx = grad_in.data() + n * sample + static_cast<std::size_t>(c) * plane;
            Scalar dg = 0;
            for (std::size_t i = 0; i < plane; ++i) {
                dg += gy[i] * x[i];
                gx[i] = gy[i] * g;
            }
            dz[c] = forced_gate_ ? 0 : dg * g * (1 - g);
        }
        if (forced_gate_) continue;
        const Scalar* ha = hidden_avg_.data() + static_cast<std::size_t>(n) * hidden_;
        const Scalar* hm = hidden_max_.data() + static_cast<std::size_t>(n) * hidden_;
        // f1 and f2 share w2, and both receive dz.
        for (int h = 0; h < hidden_; ++h) {
            Scalar acc = 0;
            for (int c = 0; c < channels_; ++c) {
                const Scalar w = w2_.value[static_cast<std::size_t>(c) * hidden_ + h];
                w2_.grad[static_cast<std::size_t>(c) * hidden_ + h] +=
                    dz[c] * ((ha[h] > 0 ? ha[h] : 0) + (hm[h] > 0 ? hm[h] : 0));
                acc += w * dz[c];
            }
            dh_avg[h] = ha[h] > 0 ? acc : 0;
            dh_max[h] = hm[h] > 0 ? acc : 0;
        }
        for (int c = 0; c < channels_; ++c) {
            const std::size_t nc = static_cast<std::size_t>(n) * channels_ + c;
            Scalar d_avg = 0, d_max = 0;
            for (int h = 0; h < hidden_; ++h) {
                const std::size_t idx = static_cast<std::size_t>(h) * channels_ + c;
                w1_.grad[idx] += dh_avg[h] * pooled_avg_[nc] + dh_max[h] * pooled_max_[nc];
                d_avg += w1_.value[idx] * dh_avg[h];
                d_max += w1_.value[idx] * dh_max[h];
            }
            Scalar* gx = grad_in.data() + n * sample + static_cast<std::size_t>(c) * plane;
            const Scalar spread = d_avg / static_cast<Scalar>(plane);
            for (std::size_t i = 0; i < plane; ++i) gx[i] += spread;
            grad_in[argmax_[nc]] += d_max;
        }
    }
    return grad_in;
}

}  // namespace nn
}  // namespace semattn
