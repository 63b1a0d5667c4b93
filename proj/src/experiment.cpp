#include "semattn/experiment.hpp"

#include <sstream>

#include "semattn/errors.hpp"
#include "semattn/semantic_branch.hpp"

namespace semattn::experiment {

namespace {

void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(2);
    ss << v;
    return ss.str();
}

}  // namespace

LoadedData load_data(const std::filesystem::path& root, int semantic_subset, std::uint64_t subset_seed) {
    LoadedData d;
    d.train_manifest = data::load_manifest(root, data::Split::Train);
    d.val_manifest = data::load_manifest(root, data::Split::Val);
    if (semantic_subset > 0) {
        d.train_manifest = data::restrict_semantic_classes(d.train_manifest, semantic_subset, subset_seed);
        d.val_manifest = data::restrict_semantic_classes(d.val_manifest, semantic_subset, subset_seed);
    }
    d.train = data::load_all(d.train_manifest);
    d.val = data::load_all(d.val_manifest);
    return d;
}

Checkpoint Pipeline::branch(const RunConfig& cfg, train::Stage stage, const LoadedData& data,
                            const std::string& data_tag) {
    const ModelConfig model_cfg =
        cfg.model_config(data.train_manifest.num_scene_classes(), data.train_manifest.num_semantic_classes);
    const train::TrainConfig tc = cfg.train_config(stage);
    const char* section = stage == train::Stage::BranchRgb ? "rgb" : "semantic";
    std::string key = train::to_string(stage) + "|" + to_json(model_cfg).at(section).dump() + "|" +
                      std::to_string(tc.seed) + "|" + std::to_string(tc.max_epochs) + "|" +
                      std::to_string(tc.learning_rate) + "|" + std::to_string(tc.batch_size);
    if (stage == train::Stage::BranchSemantic) key += "|" + data_tag;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    say(log_, "training " + train::to_string(stage) + " (seed " + std::to_string(tc.seed) + ", " + data_tag + ")");
    train::StageInputs in;
    in.on_epoch = [this](const train::EpochStats& s) {
        say(log_, "  epoch " + std::to_string(s.epoch) + " " + s.split + " loss " + fmt(s.loss) + " top1 " + fmt(s.top1));
    };
    auto result = train::train_stage(tc, model_cfg, data.train, in);
    cache_.emplace(key, result.checkpoint);
    return result.checkpoint;
}

Checkpoint Pipeline::fusion(const RunConfig& cfg, const LoadedData& data, const std::string& data_tag) {
    const ModelConfig model_cfg =
        cfg.model_config(data.train_manifest.num_scene_classes(), data.train_manifest.num_semantic_classes);
    const train::TrainConfig tc = cfg.train_config(train::Stage::Fusion);
    train::StageInputs in;
    in.rgb_branch = branch(cfg, train::Stage::BranchRgb, data, data_tag);
    in.semantic_branch = branch(cfg, train::Stage::BranchSemantic, data, data_tag);
    say(log_, "training fusion " + to_string(model_cfg.fusion.mechanism) + "/" + to_string(model_cfg.fusion.conv_plan) +
                  " (seed " + std::to_string(tc.seed) + ", " + data_tag + ")");
    in.on_epoch = [this](const train::EpochStats& s) {
        say(log_, "  epoch " + std::to_string(s.epoch) + " " + s.split + " loss " + fmt(s.loss) + " top1 " + fmt(s.top1));
    };
    return train::train_stage(tc, model_cfg, data.train, in).checkpoint;
}

eval::MetricsReport Pipeline::evaluate(const Checkpoint& ckpt, const LoadedData& data, eval::Pathway pathway,
                                       const RunConfig& cfg) {
    auto model = train::model_from_checkpoint(ckpt);
    const auto protocol = eval::parse_protocol(cfg.get("eval.protocol"));
    const auto records = eval::predict(*model, data.val, pathway, protocol, cfg.get_int("eval.batch_size"));
    return eval::compute_metrics(records, data.val_manifest.num_scene_classes(), protocol);
}

namespace {

struct Row {
    std::string variant;
    nlohmann::json per_seed = nlohmann::json::array();
    std::vector<double> top1, mca;
    nlohmann::json info = nlohmann::json::object();

    void add(std::uint64_t seed, const eval::MetricsReport& m) {
        per_seed.push_back({{"seed", seed}, {"top1", m.top1}, {"mca", m.mca}});
        top1.push_back(m.top1);
        mca.push_back(m.mca);
    }

    nlohmann::json json() const {
        nlohmann::json j = {{"variant", variant}, {"per_seed", per_seed}, {"mean_top1", mean(top1)}, {"mean_mca", mean(mca)}};
        j.update(info);
        return j;
    }
};

Row& row(std::vector<Row>& rows, const std::string& name) {
    for (auto& r : rows) {
        if (r.variant == name) return r;
    }
    Row r;
    r.variant = name;
    rows.push_back(std::move(r));
    return rows.back();
}

}  // namespace

nlohmann::json run_ablation(const RunConfig& base, const std::string& axis, const Logger& log) {
    if (axis != "mechanism" && axis != "fusion_depth" && axis != "semantic_backbone" && axis != "semantic_subset") {
        throw ConfigError("unknown ablation axis '" + axis + "'");
    }
    const auto root = base.data_root();
    const LoadedData full = load_data(root, base.get_int("data.semantic_subset"), base.get_u64("data.subset_seed"));
    const int num_labels = full.train_manifest.num_semantic_classes;
    Pipeline pipeline(log);
    std::vector<Row> rows;
    std::vector<std::uint64_t> seeds;
    for (const auto& s : base.get_list("ablate.seeds")) {
        RunConfig probe = base;
        probe.set("train.seed", s);
        seeds.push_back(probe.get_u64("train.seed"));
    }
    if (seeds.empty()) throw ConfigError("ablate.seeds is empty");

    for (std::uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.set("train.seed", std::to_string(seed));
        if (axis == "semantic_backbone") {
            for (const auto& b : base.get_list("ablate.semantic_backbones")) {
                RunConfig v = cfg;
                v.set("model.semantic.backbone", b);
                // Custom widths belong to one backbone; variants use their defaults.
                v.set("model.semantic.channel_plan", "");
                const auto ckpt = pipeline.branch(v, train::Stage::BranchSemantic, full, "full");
                Row& r = row(rows, b);
                r.add(seed, pipeline.evaluate(ckpt, full, eval::Pathway::Semantic, v));
                SemanticBranchConfig sc = ckpt.model_config.semantic;
                r.info["parameters"] = count_parameters(sc);
                sc.num_semantic_classes = 150;
                r.info["parameters_at_L150"] = count_parameters(sc);
            }
            continue;
        }

        const auto rgb = pipeline.branch(cfg, train::Stage::BranchRgb, full, "full");
        row(rows, "rgb_only").add(seed, pipeline.evaluate(rgb, full, eval::Pathway::Rgb, cfg));
        if (axis == "mechanism" || axis == "fusion_depth") {
            const auto sem = pipeline.branch(cfg, train::Stage::BranchSemantic, full, "full");
            row(rows, "semantic_only").add(seed, pipeline.evaluate(sem, full, eval::Pathway::Semantic, cfg));
            const bool mech = axis == "mechanism";
            for (const auto& variant : base.get_list(mech ? "ablate.mechanisms" : "ablate.conv_plans")) {
                RunConfig v = cfg;
                v.set(mech ? "fusion.mechanism" : "fusion.conv_plan", variant);
                const auto ckpt = pipeline.fusion(v, full, "full");
                const std::string name = mech ? to_string(parse_mechanism(variant)) : to_string(parse_conv_plan(variant));
                row(rows, name).add(seed, pipeline.evaluate(ckpt, full, eval::Pathway::Fused, v));
            }
            continue;
        }

        // semantic_subset
        std::vector<int> sizes;
        for (const auto& s : base.get_list("ablate.subset_sizes")) sizes.push_back(std::stoi(s));
        if (sizes.empty()) sizes = {num_labels, std::max(1, num_labels / 3)};
        for (int size : sizes) {
            if (size < 1 || size > num_labels) throw ConfigError("ablate.subset_sizes: " + std::to_string(size) + " outside [1, L]");
            const std::string tag = "L=" + std::to_string(size) + "/seed=" + std::to_string(seed);
            const LoadedData restricted = size == num_labels ? full : load_data(root, size, seed);
            const auto ckpt = pipeline.fusion(cfg, restricted, size == num_labels ? "full" : tag);
            Row& r = row(rows, "L=" + std::to_string(size));
            r.add(seed, pipeline.evaluate(ckpt, restricted, eval::Pathway::Fused, cfg));
            r.info["subset_size"] = size;
        }
    }

    nlohmann::json out = {{"axis", axis}, {"seeds", seeds}, {"protocol", base.get("eval.protocol")}};
    out["rows"] = nlohmann::json::array();
    for (const auto& r : rows) out["rows"].push_back(r.json());
    return out;
}

std::string ablation_table(const nlohmann::json& result) {
    std::string out = "| variant | mean Top@1 | mean MCA | per-seed Top@1 |\n|---|---|---|---|\n";
    for (const auto& r : result.at("rows")) {
        std::string seeds;
        for (const auto& s : r.at("per_seed")) seeds += (seeds.empty() ? "" : ", ") + fmt(s.at("top1").get<double>());
        out += "| " + r.at("variant").get<std::string>() + " | " + fmt(r.at("mean_top1").get<double>()) + " | " +
               fmt(r.at("mean_mca").get<double>()) + " | " + seeds + " |\n";
    }
    return out;
}

}  // namespace semattn::experiment
