#include "semattn/rgb_branch.hpp"

#include "semattn/errors.hpp"

namespace semattn {

namespace nn {

namespace {

std::unique_ptr<Sequential> projection(int in_channels, int out_channels, int stride, Rng& rng) {
    auto seq = std::make_unique<Sequential>();
    seq->add<Conv2d>("0", ConvSpec{in_channels, out_channels, 1, stride, 0, false}, rng);
    seq->add<BatchNorm2d>("1", out_channels);
    return seq;
}

}  // namespace

BasicBlock::BasicBlock(int in_channels, int out_channels, int stride, Rng& rng) {
    main_.add<Conv2d>("conv1", ConvSpec{in_channels, out_channels, 3, stride, 1, false}, rng);
    main_.add<BatchNorm2d>("bn1", out_channels);
    main_.add<ReLU>("relu");
    main_.add<Conv2d>("conv2", ConvSpec{out_channels, out_channels, 3, 1, 1, false}, rng);
    main_.add<BatchNorm2d>("bn2", out_channels);
    if (stride != 1 || in_channels != out_channels) downsample_ = projection(in_channels, out_channels, stride, rng);
}

Tensor BasicBlock::forward(const Tensor& x, Mode mode) {
    Tensor y = main_.forward(x, mode);
    y += downsample_ ? downsample_->forward(x, mode) : x;
    return out_relu_.forward(y, mode);
}

Tensor BasicBlock::backward(const Tensor& grad_out) {
    const Tensor g = out_relu_.backward(grad_out);
    Tensor gx = main_.backward(g);
    gx += downsample_ ? downsample_->backward(g) : g;
    return gx;
}

void BasicBlock::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    main_.visit_parameters(prefix, fn);
    if (downsample_) downsample_->visit_parameters(join_name(prefix, "downsample"), fn);
}

void BasicBlock::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
    main_.visit_buffers(prefix, fn);
    if (downsample_) downsample_->visit_buffers(join_name(prefix, "downsample"), fn);
}

BottleneckBlock::BottleneckBlock(int in_channels, int width, int stride, Rng& rng) {
    const int out_channels = width * kExpansion;
    main_.add<Conv2d>("conv1", ConvSpec{in_channels, width, 1, 1, 0, false}, rng);
    main_.add<BatchNorm2d>("bn1", width);
    main_.add<ReLU>("relu1");
    main_.add<Conv2d>("conv2", ConvSpec{width, width, 3, stride, 1, false}, rng);
    main_.add<BatchNorm2d>("bn2", width);
    main_.add<ReLU>("relu2");
    main_.add<Conv2d>("conv3", ConvSpec{width, out_channels, 1, 1, 0, false}, rng);
    main_.add<BatchNorm2d>("bn3", out_channels);
    if (stride != 1 || in_channels != out_channels) downsample_ = projection(in_channels, out_channels, stride, rng);
}

Tensor BottleneckBlock::forward(const Tensor& x, Mode mode) {
    Tensor y = main_.forward(x, mode);
    y += downsample_ ? downsample_->forward(x, mode) : x;
    return out_relu_.forward(y, mode);
}

Tensor BottleneckBlock::backward(const Tensor& grad_out) {
    const Tensor g = out_relu_.backward(grad_out);
    Tensor gx = main_.backward(g);
    gx += downsample_ ? downsample_->backward(g) : g;
    return gx;
}

void BottleneckBlock::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    main_.visit_parameters(prefix, fn);
    if (downsample_) downsample_->visit_parameters(join_name(prefix, "downsample"), fn);
}

void BottleneckBlock::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
    main_.visit_buffers(prefix, fn);
    if (downsample_) downsample_->visit_buffers(join_name(prefix, "downsample"), fn);
}

ResidualTrunk::ResidualTrunk(const ResidualTrunkSpec& spec, Rng& rng) {
    if (spec.stage_widths.size() != spec.blocks_per_stage.size() || spec.stage_widths.empty()) {
        throw ConfigError("residual trunk needs one block count per stage");
    }
    const int stem_width = spec.stage_widths.front();
    stem_.add<Conv2d>("conv1", ConvSpec{spec.in_channels, stem_width, 7, 2, 3, false}, rng);
    stem_.add<BatchNorm2d>("bn1", stem_width);
    stem_.add<ReLU>("relu");
    stem_.add<MaxPool2d>("maxpool", 3, 2, 1);

    int channels = stem_width;
    for (std::size_t s = 0; s < spec.stage_widths.size(); ++s) {
        auto stage = std::make_unique<Sequential>();
        const int width = spec.stage_widths[s];
        for (int b = 0; b < spec.blocks_per_stage[s]; ++b) {
            const int stride = (s > 0 && b == 0) ? 2 : 1;
            if (spec.bottleneck) {
                stage->add<BottleneckBlock>(std::to_string(b), channels, width, stride, rng);
                channels = width * BottleneckBlock::kExpansion;
            } else {
                stage->add<BasicBlock>(std::to_string(b), channels, width, stride, rng);
                channels = width;
            }
        }
        stages_.push_back(std::move(stage));
        between_.emplace_back();
    }
    out_channels_ = channels;
}

void ResidualTrunk::set_between_stages(int i, LayerPtr layer) {
    if (i < 0 || i + 1 >= num_stages()) throw RangeError("no gap after stage " + std::to_string(i));
    between_[static_cast<std::size_t>(i)] = std::move(layer);
}

Tensor ResidualTrunk::forward(const Tensor& x, Mode mode) {
    Tensor h = stem_.forward(x, mode);
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        h = stages_[s]->forward(h, mode);
        if (between_[s]) h = between_[s]->forward(h, mode);
    }
    return h;
}

Tensor ResidualTrunk::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t s = stages_.size(); s-- > 0;) {
        if (between_[s]) g = between_[s]->backward(g);
        g = stages_[s]->backward(g);
    }
    return stem_.backward(g);
}

void ResidualTrunk::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    stem_.visit_parameters(prefix, fn);
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        stages_[s]->visit_parameters(join_name(prefix, "layer" + std::to_string(s + 1)), fn);
        if (between_[s]) between_[s]->visit_parameters(join_name(prefix, "cham" + std::to_string(s + 1)), fn);
    }
}

void ResidualTrunk::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
    stem_.visit_buffers(prefix, fn);
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        stages_[s]->visit_buffers(join_name(prefix, "layer" + std::to_string(s + 1)), fn);
    }
}

void ResidualTrunk::set_propagate_input_grad(bool enabled) {
    Layer::set_propagate_input_grad(enabled);
    stem_.set_propagate_input_grad(enabled);
}

}  // namespace nn

nn::ResidualTrunkSpec rgb_trunk_spec(const RgbBranchConfig& cfg) {
    cfg.validate();
    const int base = cfg.base_width();
    nn::ResidualTrunkSpec spec;
    spec.in_channels = 3;
    spec.stage_widths = {base, base * 2, base * 4, base * 8};
    if (cfg.backbone == RgbBackbone::Residual50) {
        spec.blocks_per_stage = {3, 4, 6, 3};
        spec.bottleneck = true;
    }
    return spec;
}

RgbBranch::RgbBranch(const RgbBranchConfig& cfg, nn::Rng& rng) : cfg_(cfg), trunk_(rgb_trunk_spec(cfg), rng) {
    if (cfg.backbone == RgbBackbone::TinyResidual && trunk_.output_channels() != 512) {
        adapter_ = std::make_unique<nn::Sequential>();
        adapter_->add<nn::Conv2d>("conv", nn::ConvSpec{trunk_.output_channels(), 512, 1, 1, 0, false}, rng);
        adapter_->add<nn::BatchNorm2d>("bn", 512);
        adapter_->add<nn::ReLU>("relu");
    }
}

int RgbBranch::output_channels() const { return adapter_ ? 512 : trunk_.output_channels(); }

Tensor RgbBranch::forward(const Tensor& x, nn::Mode mode) {
    require_rank(x, 4, "rgb_forward input");
    if (x.dim(1) != 3) throw ShapeError("rgb_forward expects 3 input channels, got " + x.shape_str());
    Tensor h = trunk_.forward(x, mode);
    return adapter_ ? adapter_->forward(h, mode) : h;
}

Tensor RgbBranch::backward(const Tensor& grad_out) {
    Tensor g = adapter_ ? adapter_->backward(grad_out) : grad_out;
    return trunk_.backward(g);
}

void RgbBranch::visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) {
    trunk_.visit_parameters(prefix, fn);
    if (adapter_) adapter_->visit_parameters(nn::join_name(prefix, "adapter"), fn);
}

void RgbBranch::visit_buffers(const std::string& prefix, const nn::BufferVisitor& fn) {
    trunk_.visit_buffers(prefix, fn);
    if (adapter_) adapter_->visit_buffers(nn::join_name(prefix, "adapter"), fn);
}

void RgbBranch::set_propagate_input_grad(bool enabled) {
    Layer::set_propagate_input_grad(enabled);
    trunk_.set_propagate_input_grad(enabled);
}

namespace {

std::size_t conv_params(int in, int out, int k) { return static_cast<std::size_t>(in) * out * k * k; }
std::size_t bn_params(int c) { return 2 * static_cast<std::size_t>(c); }

}  // namespace

std::size_t count_parameters(const RgbBranchConfig& cfg) {
    const auto spec = rgb_trunk_spec(cfg);
    const int stem = spec.stage_widths.front();
    std::size_t n = conv_params(spec.in_channels, stem, 7) + bn_params(stem);
    int channels = stem;
    for (std::size_t s = 0; s < spec.stage_widths.size(); ++s) {
        const int w = spec.stage_widths[s];
        for (int b = 0; b < spec.blocks_per_stage[s]; ++b) {
            const int stride = (s > 0 && b == 0) ? 2 : 1;
            const int out = spec.bottleneck ? w * 4 : w;
            if (spec.bottleneck) {
                n += conv_params(channels, w, 1) + bn_params(w) + conv_params(w, w, 3) + bn_params(w) +
                     conv_params(w, out, 1) + bn_params(out);
            } else {
                n += conv_params(channels, w, 3) + bn_params(w) + conv_params(w, w, 3) + bn_params(w);
            }
            if (stride != 1 || channels != out) n += conv_params(channels, out, 1) + bn_params(out);
            channels = out;
        }
    }
    if (cfg.backbone == RgbBackbone::TinyResidual && channels != 512) n += conv_params(channels, 512, 1) + bn_params(512);
    return n;
}

}  // namespace semattn
