#pragma once

#include <memory>
#include <vector>

#include "semattn/cham.hpp"
#include "semattn/model_config.hpp"
#include "semattn/rgb_branch.hpp"

namespace semattn {

// Shallow network over the densified score tensor (L x 224 x 224) emitting
// F_M of 512 x 7 x 7. ChAM gates sit between consecutive blocks.
//
//   conv4: four [3x3 conv stride 2 pad 1, BN, ReLU] blocks, then 2x2 max-pool.
//   conv3: three [5x5 conv, strides 4/2/2, pad 2, BN, ReLU] blocks, then 2x2 max-pool.
//   resnet18_style: residual trunk with L input channels, ChAM between stages.
class SemanticBranch : public nn::Layer {
 public:
    SemanticBranch(const SemanticBranchConfig& cfg, nn::Rng& rng);

    Tensor forward(const Tensor& m, nn::Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) override;
    void visit_buffers(const std::string& prefix, const nn::BufferVisitor& fn) override;
    void set_propagate_input_grad(bool enabled) override;

    const SemanticBranchConfig& config() const { return cfg_; }
    int output_channels() const { return 512; }
    const std::vector<nn::ChannelAttention*>& chams() const { return chams_; }

 private:
    SemanticBranchConfig cfg_;
    std::unique_ptr<nn::Layer> body_;
    std::vector<nn::ChannelAttention*> chams_;
};

// Learnable scalar count from the closed-form layer formulas.
std::size_t count_parameters(const SemanticBranchConfig& cfg);

}  // namespace semattn
