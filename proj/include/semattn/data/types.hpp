#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semattn::data {

// Height x width x 3 interleaved RGB with values in [0, 1].
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;
    std::string source_path;

    RgbImage() = default;
    RgbImage(int h, int w, float fill = 0.0F) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    // Throws ShapeError/NumericError if dimensions or values are invalid.
    void validate() const;
};

inline constexpr int kTopSlots = 3;
// Marks an unused slot (only possible when L < 3); its score is always 0.
inline constexpr std::uint16_t kNoLabel = 0xFFFF;

// Sparsified per-pixel label distribution: kTopSlots (label, score) pairs per
// pixel, scores nonincreasing across slots, labels distinct.
struct SemanticScoreTensor {
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::vector<std::uint16_t> labels;  // h * w * kTopSlots
    std::vector<float> scores;          // h * w * kTopSlots

    SemanticScoreTensor() = default;
    SemanticScoreTensor(int h, int w, int l)
        : height(h),
          width(w),
          num_classes(l),
          labels(static_cast<std::size_t>(h) * w * kTopSlots, 0),
          scores(static_cast<std::size_t>(h) * w * kTopSlots, 0.0F) {}

    std::size_t slot(int y, int x, int k) const { return (static_cast<std::size_t>(y) * width + x) * kTopSlots + k; }
    // Label of the highest-scoring slot.
    std::uint16_t top_label(int y, int x) const { return labels[slot(y, x, 0)]; }

    // Throws FormatError when a label is out of range or slot invariants break.
    void validate() const;
};

struct Sample {
    RgbImage image;
    SemanticScoreTensor semantics;
    int scene_label = 0;
    std::string id;
};

enum class Split { Train, Val };

std::string to_string(Split split);
Split parse_split(const std::string& s);

}  // namespace semattn::data
