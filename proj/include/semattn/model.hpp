#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "semattn/attention_fusion.hpp"
#include "semattn/model_config.hpp"
#include "semattn/rgb_branch.hpp"
#include "semattn/semantic_branch.hpp"
#include "semattn/util/seed.hpp"

namespace semattn {

// Global average pool + linear + log-softmax over a branch feature map.
// Stage-1 branches train through these temporary heads; their weights are
// kept for branch-level CAMs.
class ClassifierHead : public nn::Module {
 public:
    ClassifierHead(int channels, int num_classes, nn::Rng& rng);

    Tensor forward(const Tensor& features, nn::Mode mode);
    Tensor backward(const Tensor& grad_log_probs);
    void visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) override;

    nn::Linear& linear() { return fc_; }

 private:
    nn::GlobalAvgPool pool_;
    nn::Linear fc_;
    nn::LogSoftmax log_softmax_;
};

// Parameter groups, also used as name prefixes in checkpoints.
inline constexpr const char* kGroupRgb = "rgb";
inline constexpr const char* kGroupRgbHead = "rgb_head";
inline constexpr const char* kGroupSemantic = "semantic";
inline constexpr const char* kGroupSemanticHead = "semantic_head";
inline constexpr const char* kGroupFusion = "fusion";

// Full two-branch scene network.
class SceneModel {
 public:
    SceneModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    RgbBranch& rgb() { return rgb_; }
    SemanticBranch& semantic() { return semantic_; }
    ClassifierHead& rgb_head() { return rgb_head_; }
    ClassifierHead& semantic_head() { return semantic_head_; }
    AttentionFusion& fusion() { return *fusion_; }

    // End-to-end: branches -> attention module -> classifier. Errors carry
    // the stage name as a prefix.
    Tensor forward(const Tensor& rgb, const Tensor& semantics, nn::Mode mode);
    // Backpropagates through every stage of the last forward().
    void backward(const Tensor& grad_log_probs);

    // F_I and F_M for a batch.
    std::pair<Tensor, Tensor> features(const Tensor& rgb, const Tensor& semantics, nn::Mode mode);

    // Standalone branch classifiers (training stage 1).
    Tensor forward_rgb_only(const Tensor& rgb, nn::Mode mode);
    void backward_rgb_only(const Tensor& grad_log_probs);
    Tensor forward_semantic_only(const Tensor& semantics, nn::Mode mode);
    void backward_semantic_only(const Tensor& grad_log_probs);

    // Fresh attention module + classifier from `seed`.
    void reinitialize_fusion(std::uint64_t seed);

    // Visits parameters named "<group>.<path>". An empty group visits all.
    void visit_parameters(const nn::ParamVisitor& fn, const std::string& group = "");
    void visit_buffers(const nn::BufferVisitor& fn, const std::string& group = "");
    void zero_grad();
    std::size_t parameter_count(const std::string& group = "");

 private:
    ModelConfig cfg_;
    RgbBranch rgb_;
    SemanticBranch semantic_;
    ClassifierHead rgb_head_;
    ClassifierHead semantic_head_;
    std::unique_ptr<AttentionFusion> fusion_;
};

}  // namespace semattn
