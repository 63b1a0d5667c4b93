#include "semattn/attention_fusion.hpp"

#include <algorithm>

#include "semattn/errors.hpp"

namespace semattn {

namespace {

void build_adapter(nn::Sequential& seq, ConvPlan plan, int in_channels, nn::Rng& rng) {
    auto conv = [&](const std::string& id, int in, int out, int k) {
        seq.add<nn::Conv2d>("conv" + id, nn::ConvSpec{in, out, k, 1, 0, true}, rng);
        seq.add<nn::ReLU>("relu" + id);
    };
    switch (plan) {
        case ConvPlan::None: break;
        case ConvPlan::Two1x1:
            conv("1", in_channels, 512, 1);
            conv("2", 512, 1024, 1);
            break;
        case ConvPlan::Two3x3:
            conv("1", in_channels, 512, 3);
            conv("2", 512, 1024, 3);
            break;
        case ConvPlan::Three3x3:
            conv("1", in_channels, 512, 3);
            conv("2", 512, 1024, 3);
            conv("3", 1024, 1024, 3);
            break;
    }
}

int adapter_channels(ConvPlan plan, int in_channels) { return plan == ConvPlan::None ? in_channels : 1024; }

Tensor hadamard(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const bool batched = a.rank() == 4;
    const int c_axis = batched ? 1 : 0;
    const int batch = batched ? a.dim(0) : 1;
    const std::size_t plane = static_cast<std::size_t>(a.dim(c_axis + 1)) * a.dim(c_axis + 2);
    const std::size_t block_a = plane * a.dim(c_axis);
    const std::size_t block_b = plane * b.dim(c_axis);
    std::vector<int> shape = a.shape();
    shape[c_axis] = a.dim(c_axis) + b.dim(c_axis);
    Tensor out(shape);
    Scalar* dst = out.data();
    for (int n = 0; n < batch; ++n) {
        dst = std::copy_n(a.data() + n * block_a, block_a, dst);
        dst = std::copy_n(b.data() + n * block_b, block_b, dst);
    }
    return out;
}

}  // namespace

std::vector<int> adapter_output_shape(ConvPlan plan, int in_channels, int height, int width) {
    switch (plan) {
        case ConvPlan::None: return {in_channels, height, width};
        case ConvPlan::Two1x1: return {1024, height, width};
        case ConvPlan::Two3x3: return {1024, height - 4, width - 4};
        case ConvPlan::Three3x3: return {1024, height - 6, width - 6};
    }
    return {};
}

Tensor fuse(const Tensor& rgb_operand, const Tensor& sem_operand, FusionMechanism mechanism) {
    if (rgb_operand.rank() != sem_operand.rank() || (rgb_operand.rank() != 3 && rgb_operand.rank() != 4)) {
        throw ShapeError("fuse: operands must both be CHW or NCHW, got " + rgb_operand.shape_str() + " and " +
                         sem_operand.shape_str());
    }
    if (mechanism == FusionMechanism::Concat) {
        const int c_axis = rgb_operand.rank() == 4 ? 1 : 0;
        for (int ax = 0; ax < rgb_operand.rank(); ++ax) {
            if (ax != c_axis && rgb_operand.dim(ax) != sem_operand.dim(ax)) {
                throw ShapeError("fuse(concat): spatial/batch mismatch " + rgb_operand.shape_str() + " vs " +
                                 sem_operand.shape_str());
            }
        }
        return concat_channels(rgb_operand, sem_operand);
    }
    if (!rgb_operand.same_shape(sem_operand)) {
        throw ShapeError("fuse(" + to_string(mechanism) + "): operand shapes differ " + rgb_operand.shape_str() +
                         " vs " + sem_operand.shape_str());
    }
    if (mechanism == FusionMechanism::Additive) {
        Tensor out = rgb_operand;
        out += sem_operand;
        return out;
    }
    return hadamard(rgb_operand, sem_operand);
}

AttentionFusion::AttentionFusion(const FusionConfig& cfg, int rgb_channels, int sem_channels, nn::Rng& rng,
                                 std::uint64_t dropout_seed)
    : cfg_(cfg) {
    cfg.validate();
    build_adapter(rgb_adapter_, cfg.conv_plan, rgb_channels, rng);
    build_adapter(sem_adapter_, cfg.conv_plan, sem_channels, rng);
    const int rgb_out = adapter_channels(cfg.conv_plan, rgb_channels);
    const int sem_out = adapter_channels(cfg.conv_plan, sem_channels);
    if (cfg.mechanism == FusionMechanism::Concat) {
        fused_channels_ = rgb_out + sem_out;
    } else {
        if (rgb_out != sem_out) {
            throw ConfigError("fusion mechanism " + to_string(cfg.mechanism) + " needs equal adapter widths, got " +
                              std::to_string(rgb_out) + " and " + std::to_string(sem_out));
        }
        fused_channels_ = rgb_out;
    }
    dropout_ = &head_.add<nn::Dropout>("dropout", cfg.dropout_p, dropout_seed);
    classifier_ = &head_.add<nn::Linear>("fc", fused_channels_, cfg.num_scene_classes, rng);
}

void AttentionFusion::visit_parameters(const std::string& prefix, const nn::ParamVisitor& fn) {
    rgb_adapter_.visit_parameters(nn::join_name(prefix, "rgb_adapter"), fn);
    sem_adapter_.visit_parameters(nn::join_name(prefix, "sem_adapter"), fn);
    head_.visit_parameters(nn::join_name(prefix, "classifier"), fn);
}

void AttentionFusion::set_propagate_input_grad(bool enabled) {
    propagate_input_grad_ = enabled;
    rgb_adapter_.set_propagate_input_grad(enabled);
    sem_adapter_.set_propagate_input_grad(enabled);
}

Tensor AttentionFusion::adapt_rgb(const Tensor& f_i, nn::Mode mode) { return rgb_adapter_.forward(f_i, mode); }

Tensor AttentionFusion::adapt_semantic(const Tensor& f_m, nn::Mode mode) {
    return gate_.forward(sem_adapter_.forward(f_m, mode), mode);
}

Tensor AttentionFusion::classify(const Tensor& f_a, nn::Mode mode) {
    require_rank(f_a, 4, "classify input");
    if (f_a.dim(1) != fused_channels_) {
        throw ShapeError("classify expects " + std::to_string(fused_channels_) + " channels, got " + f_a.shape_str());
    }
    const Tensor pooled = pool_.forward(f_a, mode);
    return log_softmax_.forward(head_.forward(pooled, mode), mode);
}

Tensor AttentionFusion::forward(const Tensor& f_i, const Tensor& f_m, nn::Mode mode) {
    require_rank(f_i, 4, "fusion rgb input");
    require_rank(f_m, 4, "fusion semantic input");
    rgb_raw_ = rgb_adapter_.forward(f_i, mode);
    sem_raw_ = sem_adapter_.forward(f_m, mode);
    const bool gated = hooks_.gate_sigmoid;
    rgb_operand_ = rgb_raw_;
    sem_operand_ = sem_raw_;
    if (cfg_.mechanism == FusionMechanism::GatedRgbHadamard && gated) sem_operand_ = gate_.forward(sem_raw_, mode);
    if (cfg_.mechanism == FusionMechanism::GatedSemHadamard && gated) rgb_operand_ = gate_.forward(rgb_raw_, mode);
    fused_ = fuse(rgb_operand_, sem_operand_, cfg_.mechanism);
    return classify(fused_, mode);
}

AttentionFusion::InputGrads AttentionFusion::backward(const Tensor& grad_log_probs) {
    const Tensor g_logits = log_softmax_.backward(grad_log_probs);
    const Tensor g_fused = pool_.backward(head_.backward(g_logits));

    Tensor g_rgb, g_sem;
    switch (cfg_.mechanism) {
        case FusionMechanism::Additive:
            g_rgb = g_fused;
            g_sem = g_fused;
            break;
        case FusionMechanism::Concat: {
            const int batch = g_fused.dim(0);
            const std::size_t plane = static_cast<std::size_t>(g_fused.dim(2)) * g_fused.dim(3);
            g_rgb = Tensor(rgb_operand_.shape());
            g_sem = Tensor(sem_operand_.shape());
            const std::size_t block_a = plane * rgb_operand_.dim(1);
            const std::size_t block_b = plane * sem_operand_.dim(1);
            for (int n = 0; n < batch; ++n) {
                const Scalar* src = g_fused.data() + n * (block_a + block_b);
                std::copy_n(src, block_a, g_rgb.data() + n * block_a);
                std::copy_n(src + block_a, block_b, g_sem.data() + n * block_b);
            }
            break;
        }
        default:
            g_rgb = hadamard(g_fused, sem_operand_);
            g_sem = hadamard(g_fused, rgb_operand_);
            break;
    }
    const bool gated = hooks_.gate_sigmoid;
    if (cfg_.mechanism == FusionMechanism::GatedRgbHadamard && gated) g_sem = gate_.backward(g_sem);
    if (cfg_.mechanism == FusionMechanism::GatedSemHadamard && gated) g_rgb = gate_.backward(g_rgb);

    InputGrads grads;
    grads.rgb = rgb_adapter_.backward(g_rgb);
    grads.semantic = sem_adapter_.backward(g_sem);
    if (!propagate_input_grad_) grads = {};
    return grads;
}

}  // namespace semattn
