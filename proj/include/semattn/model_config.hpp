#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace semattn {

enum class RgbBackbone { Residual18, Residual50, TinyResidual };
enum class SemanticBackbone { Conv4, Conv3, Resnet18Style };
enum class FusionMechanism { Additive, Concat, Hadamard, GatedRgbHadamard, GatedSemHadamard };
enum class ConvPlan { None, Two1x1, Two3x3, Three3x3 };

struct RgbBranchConfig {
    RgbBackbone backbone = RgbBackbone::Residual18;
    // Scales every stage width. tiny_residual applies a further 1/8 on top.
    double width_multiplier = 1.0;

    // Stem/stage-1 width after applying the multiplier (64 for residual18).
    int base_width() const;
    void validate() const;
};

struct SemanticBranchConfig {
    SemanticBackbone backbone = SemanticBackbone::Conv4;
    bool use_cham = true;
    // Output channels per block (per stage for resnet18_style). Empty selects
    // the backbone default. The last entry must be 512.
    std::vector<int> channel_plan;
    int num_semantic_classes = 150;
    // 0 selects default_reduction_ratio(c) per ChAM.
    int cham_reduction_ratio = 0;

    std::vector<int> effective_channel_plan() const;
    void validate() const;
};

struct FusionConfig {
    FusionMechanism mechanism = FusionMechanism::GatedRgbHadamard;
    ConvPlan conv_plan = ConvPlan::Two3x3;
    double dropout_p = 0.5;
    int num_scene_classes = 0;

    void validate() const;
};

struct ModelConfig {
    RgbBranchConfig rgb;
    SemanticBranchConfig semantic;
    FusionConfig fusion;

    int num_scene_classes() const { return fusion.num_scene_classes; }
    void validate() const;
};

std::string to_string(RgbBackbone v);
std::string to_string(SemanticBackbone v);
std::string to_string(FusionMechanism v);
std::string to_string(ConvPlan v);

RgbBackbone parse_rgb_backbone(const std::string& s);
SemanticBackbone parse_semantic_backbone(const std::string& s);
FusionMechanism parse_mechanism(const std::string& s);
ConvPlan parse_conv_plan(const std::string& s);

const std::vector<FusionMechanism>& all_mechanisms();
const std::vector<ConvPlan>& all_conv_plans();

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace semattn
