#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "semattn/checkpoint.hpp"
#include "semattn/data/dataset.hpp"
#include "semattn/evaluation.hpp"
#include "semattn/run_config.hpp"

namespace semattn::experiment {

using Logger = std::function<void(const std::string&)>;

struct LoadedData {
    data::DatasetManifest train_manifest;
    data::DatasetManifest val_manifest;
    std::vector<data::Sample> train;
    std::vector<data::Sample> val;
};

// Loads both splits into memory. A nonzero `semantic_subset` restricts the
// semantic labels (seeded by `subset_seed`).
LoadedData load_data(const std::filesystem::path& root, int semantic_subset = 0, std::uint64_t subset_seed = 0);

// Stage-1 + stage-2 training driven by a RunConfig, with branch checkpoints
// memoised by (stage, model config, seed, data variant) so ablation variants
// that share a branch train it once.
class Pipeline {
 public:
    explicit Pipeline(Logger log = {}) : log_(std::move(log)) {}

    Checkpoint branch(const RunConfig& cfg, train::Stage stage, const LoadedData& data, const std::string& data_tag);
    Checkpoint fusion(const RunConfig& cfg, const LoadedData& data, const std::string& data_tag);

    // Val metrics of one pathway.
    eval::MetricsReport evaluate(const Checkpoint& ckpt, const LoadedData& data, eval::Pathway pathway,
                                 const RunConfig& cfg);

 private:
    Logger log_;
    std::map<std::string, Checkpoint> cache_;
};

// Runs one ablation axis (mechanism, fusion_depth, semantic_backbone,
// semantic_subset) over ablate.seeds. Returns
// {axis, seeds, rows: [{variant, per_seed: [{seed, top1, mca}], mean_top1, mean_mca, ...}]}.
nlohmann::json run_ablation(const RunConfig& cfg, const std::string& axis, const Logger& log = {});

// Markdown table of an ablation result.
std::string ablation_table(const nlohmann::json& result);

}  // namespace semattn::experiment
