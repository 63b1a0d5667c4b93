#pragma once

#include <cstdint>
#include <memory>

#include "semattn/model_config.hpp"
#include "semattn/nn/layers.hpp"

namespace semattn {

// Combines two prepared operands. Hadamard-family mechanisms multiply,
// additive sums, concat stacks along the channel axis. Where the sigmoid goes
// is decided by the caller (see AttentionFusion). Accepts CHW or NCHW.
Tensor fuse(const Tensor& rgb_operand, const Tensor& sem_operand, FusionMechanism mechanism);

// Internal switches used by equivalence tests.
struct FusionHooks {
    // When false the gating sigmoid of the gated mechanisms becomes identity.
    bool gate_sigmoid = true;
};

// Attention module plus scene classifier:
//   F_{I,A} = relu(conv(relu(conv(F_I))))            (rgb adapter)
//   F_{M,A} = sigmoid(relu(conv(relu(conv(F_M)))))   (semantic adapter, gated side)
//   F_A     = fuse(F_{I,A}, F_{M,A})
//   y       = log_softmax(fc(dropout(avgpool(F_A))))
// Adapter convolutions are unpadded, so 7x7 -> 5x5 -> 3x3 for the default plan.
class AttentionFusion : public nn::Module {
 public:
    AttentionFusion(const FusionConfig& cfg, int rgb_channels, int sem_channels, nn::Rng& rng,
                    std::uint64_t dropout_seed);

    // Adapter outputs for a single call; adapt_semantic includes the sigmoid.
    Tensor adapt_rgb(const Tensor& f_i, nn::Mode mode);
    Tensor adapt_semantic(const Tensor& f_m, nn::Mode mode);

    // Pooled classifier over F_A; returns log-probabilities [N, K].
    Tensor classify(const Tensor& f_a, nn::Mode mode);

    // F_I, F_M (NCHW) -> log-probabilities [N, K].
    Tensor forward(const Tensor& f_i, const Tensor& f_m, nn::Mode mode);

    struct InputGrads {
        Tensor rgb;
        Tensor semantic;
    };
    // Backpropagates d(loss)/d(log-probs) from the last forward. Input grads are
    // only computed when propagate_input_grad is enabled.
    InputGrads backward(const Tensor& grad_log_probs);

    void visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) override;
    void set_propagate_input_grad(bool enabled);

    const FusionConfig& config() const { return cfg_; }
    int fused_channels() const { return fused_channels_; }
    FusionHooks& hooks() { return hooks_; }
    nn::Linear& classifier() { return *classifier_; }
    nn::Dropout& dropout() { return *dropout_; }
    nn::Sequential& rgb_adapter() { return rgb_adapter_; }
    nn::Sequential& semantic_adapter() { return sem_adapter_; }

    // Intermediates of the last forward call.
    const Tensor& last_rgb_operand() const { return rgb_operand_; }
    const Tensor& last_sem_operand() const { return sem_operand_; }
    const Tensor& last_fused() const { return fused_; }

 private:
    FusionConfig cfg_;
    FusionHooks hooks_;
    nn::Sequential rgb_adapter_;
    nn::Sequential sem_adapter_;
    nn::Sigmoid gate_;
    nn::GlobalAvgPool pool_;
    nn::Dropout* dropout_ = nullptr;
    nn::Linear* classifier_ = nullptr;
    nn::Sequential head_;
    nn::LogSoftmax log_softmax_;
    int fused_channels_ = 0;
    bool propagate_input_grad_ = true;

    Tensor rgb_raw_, sem_raw_;
    Tensor rgb_operand_, sem_operand_;
    Tensor fused_;
};

// Output shape of one adapter for a 7x7 input under `plan`: {channels, h, w}.
std::vector<int> adapter_output_shape(ConvPlan plan, int in_channels, int height, int width);

}  // namespace semattn
