#pragma once

#include <optional>
#include <vector>

#include "semattn/nn/module.hpp"

namespace semattn {

// Channel Attention Module: spatial average and max squeezes pass through a
// shared bias-free bottleneck (c -> c/r -> c), are summed and squashed into a
// per-channel sigmoid gate that rescales the input feature map.

struct ChamParams {
    Tensor w1;  // [c/r, c]
    Tensor w2;  // [c, c/r]
    int reduction_ratio = 1;

    int channels() const { return w1.rank() == 2 ? w1.dim(1) : 0; }
    void validate() const;
};

// 16 for c >= 16, else 1.
int default_reduction_ratio(int channels);

// Gate m_c for a single CHW feature map; every entry lies in (0, 1).
Tensor channel_attention_map(const Tensor& features, const ChamParams& params);

// output[ch, i, j] = gate[ch] * features[ch, i, j].
Tensor apply_channel_gate(const Tensor& features, const Tensor& gate);

namespace nn {

class ChannelAttention : public Layer {
 public:
    ChannelAttention(int channels, int reduction_ratio, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;

    int channels() const { return channels_; }
    int reduction_ratio() const { return ratio_; }
    ChamParams params() const;
    void set_params(const ChamParams& params);

    // Replaces the computed gate with a constant (test hook).
    void force_gate(std::optional<Scalar> value) { forced_gate_ = value; }

    // Gates from the most recent forward, [N, C].
    const Tensor& last_gate() const { return gate_; }

 private:
    int channels_;
    int ratio_;
    int hidden_;
    Parameter w1_;
    Parameter w2_;
    std::optional<Scalar> forced_gate_;

    Tensor input_;
    Tensor gate_;                     // [N, C]
    Tensor pooled_avg_, pooled_max_;  // [N, C]
    Tensor hidden_avg_, hidden_max_;  // pre-ReLU [N, C/r]
    std::vector<std::size_t> argmax_;  // [N * C] flat index into input
};

}  // namespace nn
}  // namespace semattn
