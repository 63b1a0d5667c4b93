#include "semattn/semantic_branch.hpp"

#include "semattn/errors.hpp"

namespace semattn {

namespace {

struct ShallowPlan {
    int kernel;
    int padding;
    std::vector<int> strides;
};

ShallowPlan shallow_plan(SemanticBackbone backbone) {
    if (backbone == SemanticBackbone::Conv3) return {5, 2, {4, 2, 2}};
    return {3, 1, {2, 2, 2, 2}};
}

int cham_ratio(const SemanticBranchConfig& cfg, int channels) {
    return cfg.cham_reduction_ratio > 0 ? cfg.cham_reduction_ratio : default_reduction_ratio(channels);
}

}  // namespace

SemanticBranch::SemanticBranch(const SemanticBranchConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const auto plan = cfg.effective_channel_plan();
    if (cfg.backbone == SemanticBackbone::Resnet18Style) {
        nn::ResidualTrunkSpec spec;
        spec.in_channels = cfg.num_semantic_classes;
        spec.stage_widths = plan;
        auto trunk = std::make_unique<nn::ResidualTrunk>(spec, rng);
        if (cfg.use_cham) {
            for (int s = 0; s + 1 < trunk->num_stages(); ++s) {
                auto cham = std::make_unique<nn::ChannelAttention>(plan[s], cham_ratio(cfg, plan[s]), rng);
                chams_.push_back(cham.get());
                trunk->set_between_stages(s, std::move(cham));
            }
        }
        body_ = std::move(trunk);
        return;
    }
    const ShallowPlan shape = shallow_plan(cfg.backbone);
    auto seq = std::make_unique<nn::Sequential>();
    int channels = cfg.num_semantic_classes;
    for (std::size_t b = 0; b < plan.size(); ++b) {
        const std::string id = std::to_string(b + 1);
        seq->add<nn::Conv2d>("conv" + id, nn::ConvSpec{channels, plan[b], shape.kernel, shape.strides[b], shape.padding, false},
                             rng);
        seq->add<nn::BatchNorm2d>("bn" + id, plan[b]);
        seq->add<nn::ReLU>("relu" + id);
        if (cfg.use_cham && b + 1 < plan.size()) {
            auto& cham = seq->add<nn::ChannelAttention>("cham" + id, plan[b], cham_ratio(cfg, plan[b]), rng);
            chams_.push_back(&cham);
        }
        channels = plan[b];
    }
    seq->add<nn::MaxPool2d>("pool", 2, 2, 0);
    body_ = std::move(seq);
}

Tensor SemanticBranch::forward(const Tensor& m, nn::Mode mode) {
    require_rank(m, 4, "semantic_forward input");
    if (m.dim(1) != cfg_.num_semantic_classes) {
        throw ShapeError("semantic_forward expects " + std::to_string(cfg_.num_semantic_classes) +
                         " input channels, got " + m.shape_str());
    }
    return body_->forward(m, mode);
}

Tensor SemanticBranch::backward(const Tensor& grad_out) { return body_->backward(grad_out); }

void SemanticBranch::visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) {
    body_->visit_parameters(prefix, fn);
}

void SemanticBranch::visit_buffers(const std::string& prefix, const nn::BufferVisitor& fn) {
    body_->visit_buffers(prefix, fn);
}

void SemanticBranch::set_propagate_input_grad(bool enabled) {
    Layer::set_propagate_input_grad(enabled);
    body_->set_propagate_input_grad(enabled);
}

std::size_t count_parameters(const SemanticBranchConfig& cfg) {
    cfg.validate();
    const auto plan = cfg.effective_channel_plan();
    auto conv = [](int in, int out, int k) { return static_cast<std::size_t>(in) * out * k * k; };
    auto cham = [&cfg](int c) {
        const int r = cham_ratio(cfg, c);
        return 2 * static_cast<std::size_t>(c) * static_cast<std::size_t>(c / r);
    };
    std::size_t n = 0;
    if (cfg.backbone == SemanticBackbone::Resnet18Style) {
        int channels = plan.front();
        n += conv(cfg.num_semantic_classes, channels, 7) + 2 * static_cast<std::size_t>(channels);
        for (std::size_t s = 0; s < plan.size(); ++s) {
            const int w = plan[s];
            for (int b = 0; b < 2; ++b) {
                const int stride = (s > 0 && b == 0) ? 2 : 1;
                n += conv(channels, w, 3) + conv(w, w, 3) + 4 * static_cast<std::size_t>(w);
                if (stride != 1 || channels != w) n += conv(channels, w, 1) + 2 * static_cast<std::size_t>(w);
                channels = w;
            }
            if (cfg.use_cham && s + 1 < plan.size()) n += cham(w);
        }
        return n;
    }
    const int kernel = cfg.backbone == SemanticBackbone::Conv3 ? 5 : 3;
    int channels = cfg.num_semantic_classes;
    for (std::size_t b = 0; b < plan.size(); ++b) {
        n += conv(channels, plan[b], kernel) + 2 * static_cast<std::size_t>(plan[b]);
        if (cfg.use_cham && b + 1 < plan.size()) n += cham(plan[b]);
        channels = plan[b];
    }
    return n;
}

}  // namespace semattn
