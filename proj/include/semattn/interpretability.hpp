#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semattn/data/types.hpp"
#include "semattn/evaluation.hpp"
#include "semattn/model.hpp"
#include "semattn/tensor.hpp"

namespace semattn::interp {

inline constexpr int kCamSize = 224;

enum class CamSource { RgbBranch, SemanticBranch, Fused };
std::string to_string(CamSource s);

struct ActivationMap {
    int height = 0;
    int width = 0;
    // Row-major, min-max normalised to [0, 1]; constant maps become all zeros.
    std::vector<double> values;
    CamSource source = CamSource::Fused;
    int predicted_class = 0;
    // Top-3 (class, log-probability) of the pathway's prediction.
    std::vector<std::pair<int, double>> top3;

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Weighted channel sum of the raw maps (no upsampling or normalisation).
// features: CHW; weights: [K, C] classifier matrix.
std::vector<double> weighted_channel_sum(const Tensor& features, const Tensor& weights, int class_index);

// Class activation map: weighted channel sum, bilinear upsample to
// out_size x out_size (half-pixel centres), min-max normalisation.
// Throws RangeError if class_index >= K.
ActivationMap compute_cam(const Tensor& features, const Tensor& weights, int class_index, int out_size = kCamSize);

// CAM of one prepared (224x224) sample along a pathway, for the predicted
// class. Branch pathways use the stage-1 heads; fused uses the fusion
// classifier over F_A.
ActivationMap explain_sample(SceneModel& model, const data::Sample& prepared, eval::Pathway pathway);

struct ObjectSceneCorrelation {
    std::vector<double> attention;  // per semantic label
    long sample_count = 0;
    // Total CAM mass seen, for conservation checks.
    double total_mass = 0;

    explicit ObjectSceneCorrelation(int num_labels = 0) : attention(num_labels, 0.0) {}
    void merge(const ObjectSceneCorrelation& other);
};

// Adds each pixel's CAM value to the bin of the pixel's top-1 label.
// Throws ShapeError when the CAM and semantics are not aligned.
void accumulate_object_attention(const ActivationMap& cam, const data::SemanticScoreTensor& semantics,
                                 ObjectSceneCorrelation& acc);

struct CorrelationEntry {
    int label = 0;
    std::string label_name;
    std::string group;
    double weight = 0;
};

// Labels sorted by accumulated attention (descending, ties by label index),
// weights normalised to sum 1. `groups` tags each label indoor/outdoor/both.
std::vector<CorrelationEntry> emit_correlation_report(const ObjectSceneCorrelation& acc,
                                                      const std::vector<std::string>& label_names,
                                                      const std::vector<std::string>& groups);

nlohmann::json to_json(const std::vector<CorrelationEntry>& report);

// "CAM1", u32 height, u32 width, u32 reserved, then f32 values, little-endian.
std::string encode_cam(const ActivationMap& cam);
ActivationMap decode_cam(const std::string& bytes);

// Jet-coloured heatmap blended over the image (same size as the CAM).
std::string render_overlay_png(const ActivationMap& cam, const data::RgbImage& image, double alpha = 0.5);

// Horizontal bar chart of the report, bars coloured by group.
std::string render_bar_chart_png(const std::vector<CorrelationEntry>& report, int max_bars = 30);

}  // namespace semattn::interp
