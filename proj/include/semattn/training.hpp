#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semattn/checkpoint.hpp"
#include "semattn/data/dataset.hpp"
#include "semattn/data/transforms.hpp"
#include "semattn/model.hpp"

namespace semattn::train {

enum class Stage { BranchRgb, BranchSemantic, Fusion };

std::string to_string(Stage s);
// Accepts "branch_rgb"/"rgb", "branch_semantic"/"semantic", "fusion".
Stage parse_stage(const std::string& s);

struct TrainConfig {
    Stage stage = Stage::BranchRgb;
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 32;
    int max_epochs = 30;
    // Step decay: lr *= lr_gamma every lr_step_epochs epochs.
    int lr_step_epochs = 15;
    double lr_gamma = 0.1;
    std::string optimizer = "sgd_momentum";
    std::uint64_t seed = 0;
    bool augment = true;
    data::AugmentConfig augmentation;

    void validate() const;
};

struct LossResult {
    double loss = 0;
    // d(loss)/d(log_probs), shape [N, K].
    Tensor grad;
};

// Mean negative log-likelihood of the targets. Throws NumericError on
// non-finite log-probabilities and RangeError on targets outside [0, K).
LossResult nll_loss(const Tensor& log_probs, const std::vector<int>& targets);

struct SgdConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
};

// v <- momentum * v + grad + weight_decay * param (decay only when
// param.decay); param <- param - lr * v.
void sgd_momentum_step(nn::Parameter& param, Tensor& velocity, const SgdConfig& cfg);

// Pluggable optimizer over named parameters.
class Optimizer {
 public:
    virtual ~Optimizer() = default;
    virtual void step(const std::vector<std::pair<std::string, nn::Parameter*>>& params) = 0;
    virtual void set_learning_rate(double lr) = 0;
    // Optimizer state as named tensors (checkpointed under "optimizer.").
    virtual std::map<std::string, Tensor> state() const = 0;
    virtual void load_state(const std::map<std::string, Tensor>& state) = 0;
};

class SgdMomentum : public Optimizer {
 public:
    explicit SgdMomentum(SgdConfig cfg) : cfg_(cfg) {}

    void step(const std::vector<std::pair<std::string, nn::Parameter*>>& params) override;
    void set_learning_rate(double lr) override { cfg_.learning_rate = lr; }
    std::map<std::string, Tensor> state() const override;
    void load_state(const std::map<std::string, Tensor>& state) override;

 private:
    SgdConfig cfg_;
    std::map<std::string, Tensor> velocity_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg);

double learning_rate_at(const TrainConfig& cfg, int epoch);

struct EpochStats {
    int epoch = 0;
    std::string split;
    double loss = 0;
    double top1 = 0;
    double mca = 0;
    double lr = 0;
    double wall_time_s = 0;
};

nlohmann::json to_json(const EpochStats& s);

struct StageInputs {
    // Required for the fusion stage.
    std::optional<Checkpoint> rgb_branch;
    std::optional<Checkpoint> semantic_branch;
    // Continue a run of the same stage from its last completed epoch.
    std::optional<Checkpoint> resume;
    // Optional validation split, evaluated after each epoch.
    const std::vector<data::Sample>* val = nullptr;
    // Called once per logged epoch/split.
    std::function<void(const EpochStats&)> on_epoch;
};

struct StageResult {
    Checkpoint checkpoint;
    std::vector<EpochStats> history;
};

// Runs one training stage on in-memory samples.
//  branch_rgb / branch_semantic: branch + its temporary head from scratch.
//  fusion: loads both branch checkpoints, freezes them (eval mode, no
//  updates), initialises the attention module and classifier afresh and
//  trains only those. Branch state is hashed before and after; a mismatch
//  throws std::logic_error.
StageResult train_stage(const TrainConfig& cfg, const ModelConfig& model_cfg, const std::vector<data::Sample>& train,
                        const StageInputs& inputs = {});

// Parameter groups a stage updates and the groups it saves.
std::vector<std::string> trained_groups(Stage stage);
std::vector<std::string> saved_groups(Stage stage);

// Rebuilds a model from a checkpoint, loading every group it contains.
std::unique_ptr<SceneModel> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace semattn::train
