#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "semattn/model.hpp"
#include "semattn/model_config.hpp"
#include "semattn/tensor.hpp"

namespace semattn {

inline constexpr int kCheckpointVersion = 1;

// File layout: 8-byte magic "SEMATTN\0", u64 header length, JSON header
// {format_version, model_config, stage, epoch, seed, extra, blobs}, then the
// blobs back to back. Each blob entry in the header carries name, dtype
// ("f64"), shape, byte offset and byte length; data is little-endian.
struct Checkpoint {
    int format_version = kCheckpointVersion;
    ModelConfig model_config;
    std::string stage;
    int epoch = 0;
    std::uint64_t seed = 0;
    nlohmann::json extra = nlohmann::json::object();
    // Parameters, normalisation buffers and optimizer state by name.
    std::map<std::string, Tensor> tensors;

    bool has_group(const std::string& group) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& context = "<memory>");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameters and buffers of the given groups ("rgb", "fusion", ...)
// into / out of a checkpoint. Loading requires every name of each group to be
// present with a matching shape (FormatError otherwise).
void store_groups(SceneModel& model, Checkpoint& ckpt, const std::vector<std::string>& groups);
void load_groups(SceneModel& model, const Checkpoint& ckpt, const std::vector<std::string>& groups);

// FNV-1a over the raw bytes of every parameter and buffer in the groups.
std::uint64_t state_hash(SceneModel& model, const std::vector<std::string>& groups);

}  // namespace semattn
