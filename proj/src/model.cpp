#include "semattn/model.hpp"

#include "semattn/errors.hpp"

namespace semattn {

namespace {

nn::Rng stream(std::uint64_t seed, const std::string& tag) { return nn::Rng(derive_seed(seed, tag)); }

// Re-throws known error types with "[stage] " prepended.
template <typename Fn>
auto tagged(const char* stage, Fn&& fn) -> decltype(fn()) {
    const std::string tag = std::string("[") + stage + "] ";
    try {
        return fn();
    } catch (const ShapeError& e) {
        throw ShapeError(tag + e.what());
    } catch (const NumericError& e) {
        throw NumericError(tag + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(tag + e.what());
    }
}

}  // namespace

ClassifierHead::ClassifierHead(int channels, int num_classes, nn::Rng& rng) : fc_(channels, num_classes, rng) {}

Tensor ClassifierHead::forward(const Tensor& features, nn::Mode mode) {
    return log_softmax_.forward(fc_.forward(pool_.forward(features, mode), mode), mode);
}

Tensor ClassifierHead::backward(const Tensor& grad_log_probs) {
    return pool_.backward(fc_.backward(log_softmax_.backward(grad_log_probs)));
}

void ClassifierHead::visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) {
    fc_.visit_parameters(nn::join_name(prefix, "fc"), fn);
}

namespace {

nn::Rng rgb_rng(std::uint64_t seed) { return stream(seed, kGroupRgb); }

}  // namespace

SceneModel::SceneModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      rgb_([&] {
          cfg.validate();
          auto rng = rgb_rng(seed);
          return RgbBranch(cfg.rgb, rng);
      }()),
      semantic_([&] {
          auto rng = stream(seed, kGroupSemantic);
          return SemanticBranch(cfg.semantic, rng);
      }()),
      rgb_head_([&] {
          auto rng = stream(seed, kGroupRgbHead);
          return ClassifierHead(rgb_.output_channels(), cfg.num_scene_classes(), rng);
      }()),
      semantic_head_([&] {
          auto rng = stream(seed, kGroupSemanticHead);
          return ClassifierHead(semantic_.output_channels(), cfg.num_scene_classes(), rng);
      }()) {
    rgb_.set_propagate_input_grad(false);
    semantic_.set_propagate_input_grad(false);
    reinitialize_fusion(seed);
}

void SceneModel::reinitialize_fusion(std::uint64_t seed) {
    auto rng = stream(seed, kGroupFusion);
    fusion_ = std::make_unique<AttentionFusion>(cfg_.fusion, rgb_.output_channels(), semantic_.output_channels(), rng,
                                                derive_seed(seed, "fusion.dropout"));
}

std::pair<Tensor, Tensor> SceneModel::features(const Tensor& rgb, const Tensor& semantics, nn::Mode mode) {
    if (rgb.rank() == 4 && semantics.rank() == 4 && rgb.dim(0) != semantics.dim(0)) {
        throw ShapeError("rgb and semantic batches differ: " + rgb.shape_str() + " vs " + semantics.shape_str());
    }
    Tensor f_i = tagged("rgb_branch", [&] { return rgb_.forward(rgb, mode); });
    Tensor f_m = tagged("semantic_branch", [&] { return semantic_.forward(semantics, mode); });
    return {std::move(f_i), std::move(f_m)};
}

Tensor SceneModel::forward(const Tensor& rgb, const Tensor& semantics, nn::Mode mode) {
    auto [f_i, f_m] = features(rgb, semantics, mode);
    return tagged("attention_fusion", [&] { return fusion_->forward(f_i, f_m, mode); });
}

void SceneModel::backward(const Tensor& grad_log_probs) {
    fusion_->set_propagate_input_grad(true);
    const auto grads = fusion_->backward(grad_log_probs);
    rgb_.backward(grads.rgb);
    semantic_.backward(grads.semantic);
}

Tensor SceneModel::forward_rgb_only(const Tensor& rgb, nn::Mode mode) {
    Tensor f_i = tagged("rgb_branch", [&] { return rgb_.forward(rgb, mode); });
    return rgb_head_.forward(f_i, mode);
}

void SceneModel::backward_rgb_only(const Tensor& grad_log_probs) { rgb_.backward(rgb_head_.backward(grad_log_probs)); }

Tensor SceneModel::forward_semantic_only(const Tensor& semantics, nn::Mode mode) {
    Tensor f_m = tagged("semantic_branch", [&] { return semantic_.forward(semantics, mode); });
    return semantic_head_.forward(f_m, mode);
}

void SceneModel::backward_semantic_only(const Tensor& grad_log_probs) {
    semantic_.backward(semantic_head_.backward(grad_log_probs));
}

void SceneModel::visit_parameters(const nn::ParamVisitor& fn, const std::string& group) {
    if (group.empty() || group == kGroupRgb) rgb_.visit_parameters(kGroupRgb, fn);
    if (group.empty() || group == kGroupRgbHead) rgb_head_.visit_parameters(kGroupRgbHead, fn);
    if (group.empty() || group == kGroupSemantic) semantic_.visit_parameters(kGroupSemantic, fn);
    if (group.empty() || group == kGroupSemanticHead) semantic_head_.visit_parameters(kGroupSemanticHead, fn);
    if (group.empty() || group == kGroupFusion) fusion_->visit_parameters(kGroupFusion, fn);
}

void SceneModel::visit_buffers(const nn::BufferVisitor& fn, const std::string& group) {
    if (group.empty() || group == kGroupRgb) rgb_.visit_buffers(kGroupRgb, fn);
    if (group.empty() || group == kGroupSemantic) semantic_.visit_buffers(kGroupSemantic, fn);
}

void SceneModel::zero_grad() {
    visit_parameters([](const std::string&, nn::Parameter& p) { p.grad.fill(0); });
}

std::size_t SceneModel::parameter_count(const std::string& group) {
    std::size_t n = 0;
    visit_parameters([&n](const std::string&, nn::Parameter& p) { n += p.value.numel(); }, group);
    return n;
}

}  // namespace semattn
