#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semattn/data/types.hpp"

namespace semattn::data {

// One entry of a split listing. Paths are relative to the dataset root.
struct SampleRef {
    std::string id;
    int scene_label = 0;
    std::string rgb_path;
    std::string sem_path;
};

// Contents of <root>/manifest.json.
struct DatasetIndex {
    std::vector<std::string> scene_classes;
    int num_semantic_classes = 0;
    std::vector<std::string> semantic_class_names;
    // "indoor", "outdoor" or "both" per semantic label.
    std::vector<std::string> semantic_groups;
    std::vector<SampleRef> train;
    std::vector<SampleRef> val;
    // Free-form provenance (e.g. generator settings).
    nlohmann::json extra = nlohmann::json::object();

    void validate() const;
};

nlohmann::json to_json(const DatasetIndex& index);
DatasetIndex dataset_index_from_json(const nlohmann::json& j);
DatasetIndex read_index(const std::filesystem::path& root);
void write_index(const std::filesystem::path& root, const DatasetIndex& index);

// One split of a dataset, optionally restricted to a subset of semantic labels.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> scene_classes;
    int num_semantic_classes = 0;
    std::vector<std::string> semantic_class_names;
    std::vector<std::string> semantic_groups;
    Split split = Split::Train;
    std::vector<SampleRef> samples;
    // Empty means every label is active.
    std::vector<bool> active_labels;

    int num_scene_classes() const { return static_cast<int>(scene_classes.size()); }
    // Throws ConfigError unless K >= 2 and every scene label is < K.
    void validate() const;
};

DatasetManifest load_manifest(const std::filesystem::path& root, Split split);

// Reads the PNG and .sem of sample `i` and zeroes inactive labels.
Sample load_sample(const DatasetManifest& manifest, std::size_t i);
std::vector<Sample> load_all(const DatasetManifest& manifest);

// Random label subset of the given size. The subset is a prefix of a seeded
// permutation of [0, L), so subsets for the same seed are nested.
std::vector<int> semantic_subset(int num_labels, int subset_size, std::uint64_t seed);
// Restricts the manifest to semantic_subset(L, subset_size, seed); scores of
// excluded labels are zeroed when samples are loaded. Throws RangeError
// unless 1 <= subset_size <= L.
DatasetManifest restrict_semantic_classes(const DatasetManifest& manifest, int subset_size, std::uint64_t seed);

}  // namespace semattn::data
