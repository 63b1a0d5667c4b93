#pragma once

#include <memory>
#include <vector>

#include "semattn/model_config.hpp"
#include "semattn/nn/layers.hpp"

namespace semattn {

namespace nn {

// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, plus identity or 1x1 projection
// shortcut, then ReLU.
class BasicBlock : public Layer {
 public:
    BasicBlock(int in_channels, int out_channels, int stride, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;
    void visit_buffers(const std::string& prefix, const BufferVisitor& fn) override;

    // Projection shortcut, or nullptr for identity.
    Sequential* downsample() { return downsample_.get(); }

 private:
    Sequential main_;
    std::unique_ptr<Sequential> downsample_;
    ReLU out_relu_;
};

// 1x1 reduce -> 3x3 (strided) -> 1x1 expand (x4), with projection shortcut
// when shape changes.
class BottleneckBlock : public Layer {
 public:
    BottleneckBlock(int in_channels, int width, int stride, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;
    void visit_buffers(const std::string& prefix, const BufferVisitor& fn) override;

    static constexpr int kExpansion = 4;
    Sequential* downsample() { return downsample_.get(); }

 private:
    Sequential main_;
    std::unique_ptr<Sequential> downsample_;
    ReLU out_relu_;
};

// Residual network trunk: 7x7/2 stem, 3x3/2 max-pool, four stages. Shared by
// the RGB branch and the resnet18_style semantic backbone.
struct ResidualTrunkSpec {
    int in_channels = 3;
    std::vector<int> stage_widths{64, 128, 256, 512};
    std::vector<int> blocks_per_stage{2, 2, 2, 2};
    bool bottleneck = false;
};

class ResidualTrunk : public Layer {
 public:
    ResidualTrunk(const ResidualTrunkSpec& spec, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;
    void visit_buffers(const std::string& prefix, const BufferVisitor& fn) override;
    void set_propagate_input_grad(bool enabled) override;

    int output_channels() const { return out_channels_; }
    Sequential& stem() { return stem_; }
    Sequential& stage(int i) { return *stages_.at(static_cast<std::size_t>(i)); }
    int num_stages() const { return static_cast<int>(stages_.size()); }

    // Optional layer run after stage i (i < num_stages - 1); used to place
    // ChAM between stages of the semantic variant.
    void set_between_stages(int i, LayerPtr layer);
    Layer* between_stages(int i) { return between_.at(static_cast<std::size_t>(i)).get(); }

 private:
    Sequential stem_;
    std::vector<std::unique_ptr<Sequential>> stages_;
    std::vector<LayerPtr> between_;
    int out_channels_ = 0;
};

}  // namespace nn

// RGB feature extractor emitting F_I (512x7x7 for residual18 on 224x224).
class RgbBranch : public nn::Layer {
 public:
    RgbBranch(const RgbBranchConfig& cfg, nn::Rng& rng);

    Tensor forward(const Tensor& x, nn::Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) override;
    void visit_buffers(const std::string& prefix, const nn::BufferVisitor& fn) override;
    void set_propagate_input_grad(bool enabled) override;

    const RgbBranchConfig& config() const { return cfg_; }
    int output_channels() const;
    nn::ResidualTrunk& trunk() { return trunk_; }
    // 1x1 conv + BN + ReLU lifting reduced widths back to 512; null otherwise.
    nn::Sequential* channel_adapter() { return adapter_.get(); }

 private:
    RgbBranchConfig cfg_;
    nn::ResidualTrunk trunk_;
    std::unique_ptr<nn::Sequential> adapter_;
};

nn::ResidualTrunkSpec rgb_trunk_spec(const RgbBranchConfig& cfg);

// Learnable scalar count from the closed-form layer formulas.
std::size_t count_parameters(const RgbBranchConfig& cfg);

}  // namespace semattn
