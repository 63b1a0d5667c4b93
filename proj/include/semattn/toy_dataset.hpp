#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "semattn/data/dataset.hpp"
#include "semattn/data/types.hpp"

namespace semattn::toy {

// Synthetic scenes: a class-tinted noisy background with 2-3 axis-aligned
// objects. Label 0 is background; each scene class owns a disjoint set of
// signature object labels; the remaining labels form a shared pool. Each
// object is drawn from the shared pool with probability `ambiguity`, else
// from the class's own set. Object colours and shapes are random, so object
// identity is visible only in the semantic tensor while the background tint
// is the RGB cue.
struct ToySpec {
    int num_scene_classes = 4;
    int num_semantic_classes = 12;
    int train_per_class = 60;
    int val_per_class = 30;
    double ambiguity = 0.5;
    std::uint64_t seed = 0;
    int image_size = 128;
    int min_objects = 2;
    int max_objects = 3;
    // Std-dev of the per-image background tint around the class colour.
    double background_jitter = 0.12;
    // Per-pixel texture noise.
    double texture_noise = 0.05;
    // Probability that an object's semantic label is replaced by a uniformly
    // random non-background label (corrupt-semantics mode).
    double corrupt_rate = 0.0;

    // Throws ConfigError. Needs L >= K + 1 (one background label plus at
    // least one signature label per class).
    void validate() const;
};

struct LabelLayout {
    int background = 0;
    // signature[k] = labels owned by scene class k.
    std::vector<std::vector<int>> signature;
    std::vector<int> shared;
};

LabelLayout label_layout(const ToySpec& spec);

// One deterministic sample; `index` counts within (split, class).
data::Sample generate_sample(const ToySpec& spec, data::Split split, int scene_class, int index);

// Writes the dataset layout (.png, .sem, manifest.json) under `root` and
// returns the manifest contents. Byte-identical for equal specs.
data::DatasetIndex generate(const ToySpec& spec, const std::filesystem::path& root);

// Sanity oracle: predicts the class whose signature labels cover the most
// pixels among the sample's top-1 labels (ties to the lower class, no
// signature at all -> class 0). Returns accuracy in percent.
double semantic_bag_oracle_accuracy(const ToySpec& spec, const std::vector<data::Sample>& samples);

}  // namespace semattn::toy
