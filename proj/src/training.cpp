#include "semattn/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "semattn/errors.hpp"
#include "semattn/evaluation.hpp"
#include "semattn/util/seed.hpp"

namespace semattn::train {

namespace {

constexpr const char* kOptimizerPrefix = "optimizer.";

nlohmann::json config_json(const TrainConfig& c) {
    return {{"stage", to_string(c.stage)},       {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},    {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
            {"lr_step_epochs", c.lr_step_epochs}, {"lr_gamma", c.lr_gamma},           {"optimizer", c.optimizer},
            {"seed", c.seed},                    {"augment", c.augment}};
}

EpochStats stats_from_json(const nlohmann::json& j) {
    return {j.at("epoch").get<int>(),    j.at("split").get<std::string>(), j.at("loss").get<double>(),
            j.at("top1").get<double>(),  j.at("mca").get<double>(),        j.at("lr").get<double>(),
            j.at("wall_time_s").get<double>()};
}

std::vector<int> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng() % i;
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

std::vector<double> row(const Tensor& t, int n) {
    const int k = t.dim(1);
    return {t.data() + static_cast<std::size_t>(n) * k, t.data() + static_cast<std::size_t>(n + 1) * k};
}

void check_branch_config(const Checkpoint& ckpt, const ModelConfig& cfg, const char* group) {
    const auto theirs = to_json(ckpt.model_config);
    const auto ours = to_json(cfg);
    if (theirs.at(group) != ours.at(group)) {
        throw ConfigError(std::string("branch checkpoint '") + group + "' config " + theirs.at(group).dump() +
                          " does not match run config " + ours.at(group).dump());
    }
    if (ckpt.model_config.num_scene_classes() != cfg.num_scene_classes()) {
        throw ConfigError("branch checkpoint was trained for a different number of scene classes");
    }
}

}  // namespace

std::string to_string(Stage s) {
    switch (s) {
        case Stage::BranchRgb: return "branch_rgb";
        case Stage::BranchSemantic: return "branch_semantic";
        case Stage::Fusion: return "fusion";
    }
    return "fusion";
}

Stage parse_stage(const std::string& s) {
    if (s == "branch_rgb" || s == "rgb") return Stage::BranchRgb;
    if (s == "branch_semantic" || s == "semantic") return Stage::BranchSemantic;
    if (s == "fusion") return Stage::Fusion;
    throw ConfigError("unknown stage '" + s + "' (expected rgb, semantic or fusion)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
    if (momentum < 0 || momentum >= 1) throw ConfigError("train.momentum must lie in [0, 1)");
    if (weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (lr_step_epochs < 1) throw ConfigError("train.lr_step_epochs must be >= 1");
    if (!(lr_gamma > 0)) throw ConfigError("train.lr_gamma must be > 0");
    if (optimizer != "sgd_momentum") throw ConfigError("unknown train.optimizer '" + optimizer + "'");
}

LossResult nll_loss(const Tensor& log_probs, const std::vector<int>& targets) {
    require_rank(log_probs, 2, "nll_loss log-probabilities");
    const int n = log_probs.dim(0), k = log_probs.dim(1);
    if (static_cast<std::size_t>(n) != targets.size()) throw ShapeError("nll_loss: batch and target counts differ");
    if (!log_probs.all_finite()) throw NumericError("nll_loss: non-finite log-probabilities");
    LossResult r;
    r.grad = Tensor({n, k});
    for (int i = 0; i < n; ++i) {
        const int t = targets[i];
        if (t < 0 || t >= k) throw RangeError("nll_loss: target " + std::to_string(t) + " outside [0, K)");
        r.loss -= log_probs[static_cast<std::size_t>(i) * k + t];
        r.grad[static_cast<std::size_t>(i) * k + t] = -1.0 / n;
    }
    r.loss /= n;
    return r;
}

void sgd_momentum_step(nn::Parameter& param, Tensor& velocity, const SgdConfig& cfg) {
    if (!velocity.same_shape(param.value)) velocity = Tensor::zeros_like(param.value);
    if (!param.grad.same_shape(param.value)) throw ShapeError("gradient shape differs from parameter shape");
    const double decay = param.decay ? cfg.weight_decay : 0.0;
    Scalar* p = param.value.data();
    const Scalar* g = param.grad.data();
    Scalar* v = velocity.data();
    for (std::size_t i = 0; i < param.value.numel(); ++i) {
        v[i] = cfg.momentum * v[i] + g[i] + decay * p[i];
        p[i] -= cfg.learning_rate * v[i];
    }
}

void SgdMomentum::step(const std::vector<std::pair<std::string, nn::Parameter*>>& params) {
    for (const auto& [name, p] : params) sgd_momentum_step(*p, velocity_[name], cfg_);
}

std::map<std::string, Tensor> SgdMomentum::state() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, v] : velocity_) out[name + ".velocity"] = v;
    return out;
}

void SgdMomentum::load_state(const std::map<std::string, Tensor>& state) {
    velocity_.clear();
    const std::string suffix = ".velocity";
    for (const auto& [name, v] : state) {
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            velocity_[name.substr(0, name.size() - suffix.size())] = v;
        }
    }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg) {
    cfg.validate();
    return std::make_unique<SgdMomentum>(SgdConfig{cfg.learning_rate, cfg.momentum, cfg.weight_decay});
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
    return cfg.learning_rate * std::pow(cfg.lr_gamma, (epoch - 1) / cfg.lr_step_epochs);
}

nlohmann::json to_json(const EpochStats& s) {
    return {{"epoch", s.epoch}, {"split", s.split}, {"loss", s.loss},       {"top1", s.top1},
            {"mca", s.mca},     {"lr", s.lr},       {"wall_time_s", s.wall_time_s}};
}

std::vector<std::string> trained_groups(Stage stage) {
    switch (stage) {
        case Stage::BranchRgb: return {kGroupRgb, kGroupRgbHead};
        case Stage::BranchSemantic: return {kGroupSemantic, kGroupSemanticHead};
        case Stage::Fusion: return {kGroupFusion};
    }
    return {};
}

std::vector<std::string> saved_groups(Stage stage) {
    if (stage == Stage::Fusion) return {kGroupRgb, kGroupRgbHead, kGroupSemantic, kGroupSemanticHead, kGroupFusion};
    return trained_groups(stage);
}

std::unique_ptr<SceneModel> model_from_checkpoint(const Checkpoint& ckpt) {
    auto model = std::make_unique<SceneModel>(ckpt.model_config, ckpt.seed);
    std::vector<std::string> groups;
    for (const char* g : {kGroupRgb, kGroupRgbHead, kGroupSemantic, kGroupSemanticHead, kGroupFusion}) {
        if (ckpt.has_group(g)) groups.emplace_back(g);
    }
    load_groups(*model, ckpt, groups);
    return model;
}

StageResult train_stage(const TrainConfig& cfg, const ModelConfig& model_cfg, const std::vector<data::Sample>& train,
                        const StageInputs& inputs) {
    cfg.validate();
    model_cfg.validate();
    if (train.empty()) throw ConfigError("training split is empty");
    const Stage stage = cfg.stage;
    const int num_classes = model_cfg.num_scene_classes();

    SceneModel model(model_cfg, cfg.seed);
    const std::vector<std::string> frozen = {kGroupRgb, kGroupRgbHead, kGroupSemantic, kGroupSemanticHead};
    std::uint64_t frozen_hash = 0;
    if (stage == Stage::Fusion) {
        if (!inputs.rgb_branch || !inputs.semantic_branch) {
            throw DependencyError("fusion stage requires both branch checkpoints (rgb and semantic)");
        }
        if (!inputs.rgb_branch->has_group(kGroupRgb) || !inputs.semantic_branch->has_group(kGroupSemantic)) {
            throw DependencyError("branch checkpoints do not contain the expected branch parameters");
        }
        check_branch_config(*inputs.rgb_branch, model_cfg, "rgb");
        check_branch_config(*inputs.semantic_branch, model_cfg, "semantic");
        load_groups(model, *inputs.rgb_branch, {kGroupRgb, kGroupRgbHead});
        load_groups(model, *inputs.semantic_branch, {kGroupSemantic, kGroupSemanticHead});
        model.reinitialize_fusion(derive_seed(cfg.seed, "fusion.init"));
        model.fusion().set_propagate_input_grad(false);
        frozen_hash = state_hash(model, frozen);
    }

    auto optimizer = make_optimizer(cfg);
    std::vector<EpochStats> history;
    int start_epoch = 1;
    if (inputs.resume) {
        const Checkpoint& r = *inputs.resume;
        if (r.stage != to_string(stage)) {
            throw ConfigError("cannot resume stage " + to_string(stage) + " from a '" + r.stage + "' checkpoint");
        }
        load_groups(model, r, saved_groups(stage));
        std::map<std::string, Tensor> opt_state;
        for (const auto& [name, t] : r.tensors) {
            if (name.rfind(kOptimizerPrefix, 0) == 0) opt_state[name.substr(std::string(kOptimizerPrefix).size())] = t;
        }
        optimizer->load_state(opt_state);
        for (const auto& h : r.extra.value("history", nlohmann::json::array())) history.push_back(stats_from_json(h));
        start_epoch = r.epoch + 1;
        if (stage == Stage::Fusion) frozen_hash = state_hash(model, frozen);
    }

    std::vector<std::pair<std::string, nn::Parameter*>> params;
    for (const auto& g : trained_groups(stage)) {
        model.visit_parameters([&](const std::string& name, nn::Parameter& p) { params.emplace_back(name, &p); }, g);
    }

    data::AugmentConfig aug = cfg.augmentation;
    if (stage == Stage::BranchSemantic) aug.photometric = false;

    // Frozen branches see a fixed centre crop when augmentation is off, so
    // their features are computed once.
    std::vector<Tensor> cached_rgb, cached_sem;
    if (stage == Stage::Fusion && !cfg.augment) {
        const std::size_t chunk = 16;
        for (std::size_t start = 0; start < train.size(); start += chunk) {
            std::vector<data::RgbImage> imgs;
            std::vector<data::SemanticScoreTensor> sems;
            for (std::size_t i = start; i < std::min(train.size(), start + chunk); ++i) {
                const data::Sample c = data::center_crop(train[i]);
                imgs.push_back(c.image);
                sems.push_back(c.semantics);
            }
            auto [f_i, f_m] = model.features(data::images_to_tensor(imgs), data::semantics_to_tensor(sems), nn::Mode::Eval);
            for (int n = 0; n < f_i.dim(0); ++n) {
                cached_rgb.push_back(f_i.sample(n));
                cached_sem.push_back(f_m.sample(n));
            }
        }
    }

    for (int epoch = start_epoch; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = learning_rate_at(cfg, epoch);
        optimizer->set_learning_rate(lr);
        const auto order = permutation(train.size(), derive_seed(cfg.seed, "shuffle/" + std::to_string(epoch)));
        std::vector<eval::PredictionRecord> records;
        double loss_sum = 0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<int> targets;
            std::vector<data::RgbImage> imgs;
            std::vector<data::SemanticScoreTensor> sems;
            std::vector<Tensor> fi_items, fm_items;
            for (std::size_t b = start; b < end; ++b) {
                const data::Sample& s = train[order[b]];
                targets.push_back(s.scene_label);
                if (!cached_rgb.empty()) {
                    fi_items.push_back(cached_rgb[order[b]]);
                    fm_items.push_back(cached_sem[order[b]]);
                    continue;
                }
                const data::Sample prepared =
                    cfg.augment ? data::augment(s, derive_seed(cfg.seed, "augment/" + std::to_string(epoch) + "/" + s.id), aug)
                                : data::center_crop(s);
                if (stage != Stage::BranchSemantic) imgs.push_back(prepared.image);
                if (stage != Stage::BranchRgb) sems.push_back(prepared.semantics);
            }

            for (const auto& g : trained_groups(stage)) {
                model.visit_parameters([](const std::string&, nn::Parameter& p) { p.grad.fill(0); }, g);
            }
            Tensor log_probs;
            switch (stage) {
                case Stage::BranchRgb:
                    log_probs = model.forward_rgb_only(data::images_to_tensor(imgs), nn::Mode::Train);
                    break;
                case Stage::BranchSemantic:
                    log_probs = model.forward_semantic_only(data::semantics_to_tensor(sems), nn::Mode::Train);
                    break;
                case Stage::Fusion: {
                    Tensor f_i, f_m;
                    if (!cached_rgb.empty()) {
                        f_i = Tensor::stack(fi_items);
                        f_m = Tensor::stack(fm_items);
                    } else {
                        std::tie(f_i, f_m) = model.features(data::images_to_tensor(imgs), data::semantics_to_tensor(sems),
                                                            nn::Mode::Eval);
                    }
                    model.fusion().dropout().reseed(derive_seed(
                        cfg.seed, "dropout/" + std::to_string(epoch) + "/" + std::to_string(batch_index)));
                    log_probs = model.fusion().forward(f_i, f_m, nn::Mode::Train);
                    break;
                }
            }

            LossResult loss;
            try {
                loss = nll_loss(log_probs, targets);
            } catch (const NumericError& e) {
                std::string ids;
                for (std::size_t b = start; b < end; ++b) ids += (ids.empty() ? "" : ",") + train[order[b]].id;
                throw NumericError(std::string(e.what()) + " (stage " + to_string(stage) + ", epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(batch_index) + ", lr " +
                                   std::to_string(lr) + ", samples " + ids + ")");
            }
            loss_sum += loss.loss * static_cast<double>(targets.size());
            for (std::size_t b = 0; b < targets.size(); ++b) {
                records.push_back({train[order[start + b]].id, row(log_probs, static_cast<int>(b)), targets[b]});
            }

            switch (stage) {
                case Stage::BranchRgb: model.backward_rgb_only(loss.grad); break;
                case Stage::BranchSemantic: model.backward_semantic_only(loss.grad); break;
                case Stage::Fusion: model.fusion().backward(loss.grad); break;
            }
            optimizer->step(params);
        }

        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        EpochStats st{epoch, "train", loss_sum / static_cast<double>(records.size()), eval::top_k_accuracy(records, 1),
                      eval::mean_class_accuracy(records, num_classes), lr, elapsed};
        history.push_back(st);
        if (inputs.on_epoch) inputs.on_epoch(st);

        if (inputs.val != nullptr && !inputs.val->empty()) {
            const auto v0 = std::chrono::steady_clock::now();
            const eval::Pathway pathway = stage == Stage::BranchRgb        ? eval::Pathway::Rgb
                                          : stage == Stage::BranchSemantic ? eval::Pathway::Semantic
                                                                           : eval::Pathway::Fused;
            const auto val_records = eval::predict(model, *inputs.val, pathway, eval::Protocol::Single);
            double val_loss = 0;
            for (const auto& r : val_records) val_loss -= r.log_probs[r.target];
            EpochStats vs{epoch,
                          "val",
                          val_loss / static_cast<double>(val_records.size()),
                          eval::top_k_accuracy(val_records, 1),
                          eval::mean_class_accuracy(val_records, num_classes),
                          lr,
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - v0).count()};
            history.push_back(vs);
            if (inputs.on_epoch) inputs.on_epoch(vs);
        }
    }

    if (stage == Stage::Fusion && state_hash(model, frozen) != frozen_hash) {
        throw std::logic_error("freeze contract violated: branch state changed during fusion training");
    }

    StageResult result;
    Checkpoint& ckpt = result.checkpoint;
    ckpt.model_config = model_cfg;
    ckpt.stage = to_string(stage);
    ckpt.epoch = cfg.max_epochs;
    ckpt.seed = cfg.seed;
    store_groups(model, ckpt, saved_groups(stage));
    for (const auto& [name, t] : optimizer->state()) ckpt.tensors[kOptimizerPrefix + name] = t;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : history) {
        nlohmann::json j = to_json(h);
        // Wall time is kept out of the checkpoint so equal seeds give equal files.
        j["wall_time_s"] = 0.0;
        hist.push_back(j);
    }
    ckpt.extra = {{"train_config", config_json(cfg)}, {"history", hist}};
    result.history = std::move(history);
    return result;
}

}  // namespace semattn::train
