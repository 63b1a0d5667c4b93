#include "semattn/model_config.hpp"

#include <cmath>

#include "semattn/errors.hpp"

namespace semattn {

int RgbBranchConfig::base_width() const {
    const double scale = backbone == RgbBackbone::TinyResidual ? width_multiplier / 8.0 : width_multiplier;
    return std::max(1, static_cast<int>(std::lround(64.0 * scale)));
}

void RgbBranchConfig::validate() const {
    if (!(width_multiplier > 0) || !std::isfinite(width_multiplier)) {
        throw ConfigError("rgb.width_multiplier must be positive");
    }
}

std::vector<int> SemanticBranchConfig::effective_channel_plan() const {
    if (!channel_plan.empty()) return channel_plan;
    switch (backbone) {
        case SemanticBackbone::Conv4: return {96, 192, 384, 512};
        case SemanticBackbone::Conv3: return {176, 352, 512};
        case SemanticBackbone::Resnet18Style: return {64, 128, 256, 512};
    }
    return {};
}

void SemanticBranchConfig::validate() const {
    if (num_semantic_classes < 1) throw ConfigError("semantic.num_classes must be >= 1");
    if (cham_reduction_ratio < 0) throw ConfigError("semantic.cham_ratio must be >= 0");
    const auto plan = effective_channel_plan();
    const std::size_t expected = backbone == SemanticBackbone::Conv3 ? 3 : 4;
    if (plan.size() != expected) {
        throw ConfigError("semantic.channel_plan for " + to_string(backbone) + " needs " + std::to_string(expected) +
                          " entries");
    }
    for (int c : plan) {
        if (c < 1) throw ConfigError("semantic.channel_plan entries must be positive");
    }
    if (plan.back() != 512) throw ConfigError("semantic.channel_plan must end in 512 output channels");
}

void FusionConfig::validate() const {
    if (num_scene_classes < 2) throw ConfigError("fusion.num_scene_classes must be >= 2");
    if (!(dropout_p >= 0 && dropout_p < 1)) throw ConfigError("fusion.dropout must be in [0, 1)");
}

void ModelConfig::validate() const {
    rgb.validate();
    semantic.validate();
    fusion.validate();
}

std::string to_string(RgbBackbone v) {
    switch (v) {
        case RgbBackbone::Residual18: return "residual18";
        case RgbBackbone::Residual50: return "residual50";
        case RgbBackbone::TinyResidual: return "tiny_residual";
    }
    return "?";
}

std::string to_string(SemanticBackbone v) {
    switch (v) {
        case SemanticBackbone::Conv4: return "conv4";
        case SemanticBackbone::Conv3: return "conv3";
        case SemanticBackbone::Resnet18Style: return "resnet18_style";
    }
    return "?";
}

std::string to_string(FusionMechanism v) {
    switch (v) {
        case FusionMechanism::Additive: return "additive";
        case FusionMechanism::Concat: return "concat";
        case FusionMechanism::Hadamard: return "hadamard";
        case FusionMechanism::GatedRgbHadamard: return "g_rgb_h";
        case FusionMechanism::GatedSemHadamard: return "g_sem_h";
    }
    return "?";
}

std::string to_string(ConvPlan v) {
    switch (v) {
        case ConvPlan::None: return "none";
        case ConvPlan::Two1x1: return "two_1x1";
        case ConvPlan::Two3x3: return "two_3x3";
        case ConvPlan::Three3x3: return "three_3x3";
    }
    return "?";
}

RgbBackbone parse_rgb_backbone(const std::string& s) {
    if (s == "residual18") return RgbBackbone::Residual18;
    if (s == "residual50") return RgbBackbone::Residual50;
    if (s == "tiny_residual") return RgbBackbone::TinyResidual;
    throw ConfigError("unknown rgb backbone '" + s + "'");
}

SemanticBackbone parse_semantic_backbone(const std::string& s) {
    if (s == "conv4") return SemanticBackbone::Conv4;
    if (s == "conv3") return SemanticBackbone::Conv3;
    if (s == "resnet18_style") return SemanticBackbone::Resnet18Style;
    throw ConfigError("unknown semantic backbone '" + s + "'");
}

FusionMechanism parse_mechanism(const std::string& s) {
    if (s == "additive") return FusionMechanism::Additive;
    if (s == "concat") return FusionMechanism::Concat;
    if (s == "hadamard") return FusionMechanism::Hadamard;
    if (s == "g_rgb_h" || s == "gated_rgb_hadamard") return FusionMechanism::GatedRgbHadamard;
    if (s == "g_sem_h" || s == "gated_sem_hadamard") return FusionMechanism::GatedSemHadamard;
    throw ConfigError("unknown fusion mechanism '" + s + "'");
}

ConvPlan parse_conv_plan(const std::string& s) {
    if (s == "none") return ConvPlan::None;
    if (s == "two_1x1") return ConvPlan::Two1x1;
    if (s == "two_3x3") return ConvPlan::Two3x3;
    if (s == "three_3x3") return ConvPlan::Three3x3;
    throw ConfigError("unknown fusion conv plan '" + s + "'");
}

const std::vector<FusionMechanism>& all_mechanisms() {
    static const std::vector<FusionMechanism> all{FusionMechanism::Additive, FusionMechanism::Concat,
                                                  FusionMechanism::Hadamard, FusionMechanism::GatedRgbHadamard,
                                                  FusionMechanism::GatedSemHadamard};
    return all;
}

const std::vector<ConvPlan>& all_conv_plans() {
    static const std::vector<ConvPlan> all{ConvPlan::None, ConvPlan::Two1x1, ConvPlan::Two3x3, ConvPlan::Three3x3};
    return all;
}

nlohmann::json to_json(const ModelConfig& cfg) {
    return {
        {"rgb", {{"backbone", to_string(cfg.rgb.backbone)}, {"width_multiplier", cfg.rgb.width_multiplier}}},
        {"semantic",
         {{"backbone", to_string(cfg.semantic.backbone)},
          {"use_cham", cfg.semantic.use_cham},
          {"channel_plan", cfg.semantic.channel_plan},
          {"num_classes", cfg.semantic.num_semantic_classes},
          {"cham_ratio", cfg.semantic.cham_reduction_ratio}}},
        {"fusion",
         {{"mechanism", to_string(cfg.fusion.mechanism)},
          {"conv_plan", to_string(cfg.fusion.conv_plan)},
          {"dropout", cfg.fusion.dropout_p},
          {"num_scene_classes", cfg.fusion.num_scene_classes}}},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    try {
        ModelConfig cfg;
        const auto& r = j.at("rgb");
        cfg.rgb.backbone = parse_rgb_backbone(r.at("backbone").get<std::string>());
        cfg.rgb.width_multiplier = r.at("width_multiplier").get<double>();
        const auto& s = j.at("semantic");
        cfg.semantic.backbone = parse_semantic_backbone(s.at("backbone").get<std::string>());
        cfg.semantic.use_cham = s.at("use_cham").get<bool>();
        cfg.semantic.channel_plan = s.at("channel_plan").get<std::vector<int>>();
        cfg.semantic.num_semantic_classes = s.at("num_classes").get<int>();
        cfg.semantic.cham_reduction_ratio = s.value("cham_ratio", 0);
        const auto& f = j.at("fusion");
        cfg.fusion.mechanism = parse_mechanism(f.at("mechanism").get<std::string>());
        cfg.fusion.conv_plan = parse_conv_plan(f.at("conv_plan").get<std::string>());
        cfg.fusion.dropout_p = f.at("dropout").get<double>();
        cfg.fusion.num_scene_classes = f.at("num_scene_classes").get<int>();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model config: ") + e.what());
    }
}

}  // namespace semattn
