#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "semattn/data/types.hpp"
#include "semattn/tensor.hpp"

namespace semattn::data {

inline constexpr int kResizeEdge = 256;
inline constexpr int kCropSize = 224;

enum class CropMode { TrainRandom, EvalCenter };

// Square crop at (top, left), optionally mirrored horizontally afterwards.
struct CropWindow {
    int top = 0;
    int left = 0;
    int size = kCropSize;
    bool flip = false;

    bool operator==(const CropWindow&) const = default;
};

// Smaller edge to `target`, aspect ratio kept. RGB is bilinear (half-pixel
// centres); score tensors use nearest neighbour so slots stay valid.
RgbImage resize_smaller_edge(const RgbImage& image, int target = kResizeEdge);
SemanticScoreTensor resize_smaller_edge(const SemanticScoreTensor& sem, int target = kResizeEdge);

// Geometry for an image of the given (already resized) size.
CropWindow choose_crop(int height, int width, CropMode mode, std::mt19937_64* rng);

RgbImage crop(const RgbImage& image, const CropWindow& window);
SemanticScoreTensor crop(const SemanticScoreTensor& sem, const CropWindow& window);

// Resize the smaller edge to 256, then crop 224x224 (random offset in train
// mode, centred in eval mode). Rejects zero-area images with ShapeError.
RgbImage resize_and_crop(const RgbImage& image, CropMode mode, std::mt19937_64* rng = nullptr);

// Ten-crop order: top-left, top-right, bottom-left, bottom-right, centre,
// then the horizontal mirrors of those five in the same order.
std::array<CropWindow, 10> ten_crop_windows(int height, int width);
std::vector<RgbImage> ten_crop(const RgbImage& image);
std::vector<SemanticScoreTensor> ten_crop(const SemanticScoreTensor& sem);

// Top-3 per pixel of a dense [L, H, W] score tensor. Ties go to the lowest
// label index; survivors keep their raw values (no renormalisation).
SemanticScoreTensor sparsify(const Tensor& dense);
// Inverse placement into a dense [L, H, W] tensor.
Tensor densify(const SemanticScoreTensor& sem);

// Zeroes slots whose label is not active and re-sorts each pixel's slots.
void apply_label_subset(SemanticScoreTensor& sem, const std::vector<bool>& active);

struct AugmentConfig {
    double flip_probability = 0.5;
    bool photometric = true;
    double blur_probability = 0.5;
    double blur_sigma_max = 1.5;
    double contrast_probability = 0.5;
    double contrast_low_percentile = 2.0;
    double contrast_high_percentile = 98.0;
    double noise_probability = 0.5;
    double noise_sigma = 0.02;
    double brightness_probability = 0.5;
    double brightness_delta = 0.15;
};

// Photometric ops touch only the RGB image, in the fixed order blur, contrast
// normalisation, gaussian noise, brightness.
RgbImage photometric(const RgbImage& image, const AugmentConfig& cfg, std::mt19937_64& rng);

// Training-time augmentation: shared random crop and flip for both
// modalities, photometric ops for RGB only. Deterministic in `seed`.
Sample augment(const Sample& sample, std::uint64_t seed, const AugmentConfig& cfg = {});

// Eval-time single centre crop of both modalities.
Sample center_crop(const Sample& sample);

// Batch conversions: NCHW tensors for the branches.
Tensor images_to_tensor(std::span<const RgbImage> images);
Tensor semantics_to_tensor(std::span<const SemanticScoreTensor> sems);

}  // namespace semattn::data
