#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "semattn/data/transforms.hpp"
#include "semattn/evaluation.hpp"
#include "semattn/model_config.hpp"
#include "semattn/toy_dataset.hpp"
#include "semattn/training.hpp"

namespace semattn {

// Flat dotted key=value settings. Every key has a documented default;
// unknown keys are rejected with ConfigError naming the key.
class RunConfig {
 public:
    struct Entry {
        std::string value;
        std::string help;
    };

    RunConfig();

    // Lines of "key = value"; '#' starts a comment; blank lines ignored.
    void load_file(const std::filesystem::path& path);
    void load_text(const std::string& text, const std::string& origin = "<text>");
    // "key=value".
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;

    const std::map<std::string, Entry>& entries() const { return entries_; }
    // All keys with values, one "key = value  # help" per line.
    std::string dump() const;

    // data.root, falling back to $SEMATTN_DATA_ROOT. Throws ConfigError when
    // neither is set.
    std::filesystem::path data_root() const;
    std::filesystem::path output_dir() const;

    // Scene/semantic class counts come from the dataset.
    ModelConfig model_config(int num_scene_classes, int num_semantic_classes) const;
    train::TrainConfig train_config(train::Stage stage) const;
    data::AugmentConfig augment_config() const;
    toy::ToySpec toy_spec() const;

 private:
    std::map<std::string, Entry> entries_;
};

}  // namespace semattn
