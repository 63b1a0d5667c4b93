#include "semattn/data/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "semattn/data/io.hpp"
#include "semattn/data/transforms.hpp"
#include "semattn/errors.hpp"
#include "semattn/util/fs.hpp"

namespace semattn::data {

namespace {

constexpr int kManifestVersion = 1;

nlohmann::json refs_to_json(const std::vector<SampleRef>& refs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : refs) {
        arr.push_back({{"id", r.id}, {"label", r.scene_label}, {"rgb", r.rgb_path}, {"sem", r.sem_path}});
    }
    return arr;
}

std::vector<SampleRef> refs_from_json(const nlohmann::json& arr) {
    std::vector<SampleRef> out;
    for (const auto& e : arr) {
        out.push_back({e.at("id").get<std::string>(), e.at("label").get<int>(), e.at("rgb").get<std::string>(),
                       e.at("sem").get<std::string>()});
    }
    return out;
}

void check_labels(const std::vector<SampleRef>& refs, std::size_t k, const char* split) {
    for (const auto& r : refs) {
        if (r.scene_label < 0 || static_cast<std::size_t>(r.scene_label) >= k) {
            throw ConfigError(std::string(split) + " sample '" + r.id + "' has scene label " +
                              std::to_string(r.scene_label) + " outside [0, " + std::to_string(k) + ")");
        }
    }
}

}  // namespace

void DatasetIndex::validate() const {
    if (scene_classes.size() < 2) throw ConfigError("dataset needs at least 2 scene classes");
    if (num_semantic_classes < 1) throw ConfigError("dataset needs at least 1 semantic class");
    if (!semantic_class_names.empty() && semantic_class_names.size() != static_cast<std::size_t>(num_semantic_classes)) {
        throw ConfigError("semantic_class_names length does not match L");
    }
    if (!semantic_groups.empty() && semantic_groups.size() != static_cast<std::size_t>(num_semantic_classes)) {
        throw ConfigError("semantic_groups length does not match L");
    }
    check_labels(train, scene_classes.size(), "train");
    check_labels(val, scene_classes.size(), "val");
}

nlohmann::json to_json(const DatasetIndex& index) {
    return {{"format_version", kManifestVersion},
            {"scene_classes", index.scene_classes},
            {"num_semantic_classes", index.num_semantic_classes},
            {"semantic_class_names", index.semantic_class_names},
            {"semantic_groups", index.semantic_groups},
            {"splits", {{"train", refs_to_json(index.train)}, {"val", refs_to_json(index.val)}}},
            {"extra", index.extra}};
}

DatasetIndex dataset_index_from_json(const nlohmann::json& j) {
    DatasetIndex index;
    try {
        if (j.at("format_version").get<int>() != kManifestVersion) throw FormatError("unsupported manifest version");
        index.scene_classes = j.at("scene_classes").get<std::vector<std::string>>();
        index.num_semantic_classes = j.at("num_semantic_classes").get<int>();
        index.semantic_class_names = j.value("semantic_class_names", std::vector<std::string>{});
        index.semantic_groups = j.value("semantic_groups", std::vector<std::string>{});
        const auto& splits = j.at("splits");
        index.train = refs_from_json(splits.value("train", nlohmann::json::array()));
        index.val = refs_from_json(splits.value("val", nlohmann::json::array()));
        index.extra = j.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    index.validate();
    return index;
}

DatasetIndex read_index(const std::filesystem::path& root) {
    const auto path = root / "manifest.json";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return dataset_index_from_json(j);
}

void write_index(const std::filesystem::path& root, const DatasetIndex& index) {
    index.validate();
    util::write_file_atomic(root / "manifest.json", to_json(index).dump(1) + "\n");
}

void DatasetManifest::validate() const {
    if (scene_classes.size() < 2) throw ConfigError("dataset needs at least 2 scene classes");
    check_labels(samples, scene_classes.size(), to_string(split).c_str());
    if (!active_labels.empty() && active_labels.size() != static_cast<std::size_t>(num_semantic_classes)) {
        throw ConfigError("active label mask does not match L");
    }
}

DatasetManifest load_manifest(const std::filesystem::path& root, Split split) {
    DatasetIndex index = read_index(root);
    DatasetManifest m;
    m.root = root;
    m.scene_classes = index.scene_classes;
    m.num_semantic_classes = index.num_semantic_classes;
    m.semantic_class_names = index.semantic_class_names;
    m.semantic_groups = index.semantic_groups;
    m.split = split;
    m.samples = split == Split::Train ? index.train : index.val;
    m.validate();
    return m;
}

Sample load_sample(const DatasetManifest& manifest, std::size_t i) {
    const SampleRef& ref = manifest.samples.at(i);
    Sample s;
    s.id = ref.id;
    s.scene_label = ref.scene_label;
    s.image = read_png(manifest.root / ref.rgb_path);
    s.semantics = read_sem(manifest.root / ref.sem_path);
    if (s.semantics.num_classes != manifest.num_semantic_classes) {
        throw FormatError(ref.sem_path + ": L=" + std::to_string(s.semantics.num_classes) + " but manifest says " +
                          std::to_string(manifest.num_semantic_classes));
    }
    if (s.image.height != s.semantics.height || s.image.width != s.semantics.width) {
        throw ShapeError("sample '" + ref.id + "': RGB and semantic dimensions differ");
    }
    if (!manifest.active_labels.empty()) apply_label_subset(s.semantics, manifest.active_labels);
    return s;
}

std::vector<Sample> load_all(const DatasetManifest& manifest) {
    std::vector<Sample> out;
    out.reserve(manifest.samples.size());
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) out.push_back(load_sample(manifest, i));
    return out;
}

std::vector<int> semantic_subset(int num_labels, int subset_size, std::uint64_t seed) {
    if (subset_size < 1 || subset_size > num_labels) {
        throw RangeError("semantic subset size " + std::to_string(subset_size) + " outside [1, " +
                         std::to_string(num_labels) + "]");
    }
    std::vector<int> perm(num_labels);
    std::iota(perm.begin(), perm.end(), 0);
    // Explicit Fisher-Yates: std::shuffle's draw pattern is library-specific.
    std::mt19937_64 rng(seed);
    for (int i = num_labels - 1; i > 0; --i) {
        const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(subset_size);
    std::sort(perm.begin(), perm.end());
    return perm;
}

DatasetManifest restrict_semantic_classes(const DatasetManifest& manifest, int subset_size, std::uint64_t seed) {
    const auto subset = semantic_subset(manifest.num_semantic_classes, subset_size, seed);
    DatasetManifest out = manifest;
    std::vector<bool> mask(manifest.num_semantic_classes, false);
    for (int l : subset) mask[l] = true;
    if (!manifest.active_labels.empty()) {
        for (std::size_t l = 0; l < mask.size(); ++l) mask[l] = mask[l] && manifest.active_labels[l];
    }
    out.active_labels = std::move(mask);
    return out;
}

}  // namespace semattn::data
