#include "semattn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

#include "semattn/checkpoint.hpp"
#include "semattn/data/transforms.hpp"
#include "semattn/errors.hpp"
#include "semattn/evaluation.hpp"
#include "semattn/experiment.hpp"
#include "semattn/interpretability.hpp"
#include "semattn/run_config.hpp"
#include "semattn/toy_dataset.hpp"
#include "semattn/training.hpp"
#include "semattn/util/fs.hpp"

namespace semattn::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
};

RunConfig build_config(const Common& c) {
    RunConfig cfg;
    if (!c.config_path.empty()) cfg.load_file(c.config_path);
    for (const auto& o : c.overrides) cfg.apply_override(o);
    return cfg;
}

void progress(const std::string& msg) { std::cerr << msg << "\n"; }

std::string stats_line(const train::EpochStats& s) { return train::to_json(s).dump(); }

int cmd_generate(const RunConfig& cfg, const std::string& out) {
    const fs::path root = out.empty() ? cfg.data_root() : fs::path(out);
    const toy::ToySpec spec = cfg.toy_spec();
    progress("generating toy dataset under " + root.string());
    const auto index = toy::generate(spec, root);
    progress("wrote " + std::to_string(index.train.size()) + " train and " + std::to_string(index.val.size()) +
             " val samples");
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& stage_name, const std::string& resume) {
    const train::Stage stage = train::parse_stage(stage_name);
    const train::TrainConfig tc = cfg.train_config(stage);
    const fs::path out = cfg.output_dir();
    const fs::path ckpt_path = out / (train::to_string(stage) + ".ckpt");
    const fs::path log_path = out / ("train_" + train::to_string(stage) + ".jsonl");

    train::StageInputs in;
    if (stage == train::Stage::Fusion) {
        const fs::path rgb = cfg.get("train.rgb_checkpoint").empty() ? out / "branch_rgb.ckpt"
                                                                      : fs::path(cfg.get("train.rgb_checkpoint"));
        const fs::path sem = cfg.get("train.semantic_checkpoint").empty()
                                 ? out / "branch_semantic.ckpt"
                                 : fs::path(cfg.get("train.semantic_checkpoint"));
        for (const auto& p : {rgb, sem}) {
            if (!fs::exists(p)) throw DependencyError("fusion stage needs branch checkpoint " + p.string());
        }
        in.rgb_branch = load_checkpoint(rgb);
        in.semantic_branch = load_checkpoint(sem);
    }
    if (!resume.empty()) in.resume = load_checkpoint(resume);

    const auto data = experiment::load_data(cfg.data_root(), cfg.get_int("data.semantic_subset"),
                                            cfg.get_u64("data.subset_seed"));
    const ModelConfig model_cfg =
        cfg.model_config(data.train_manifest.num_scene_classes(), data.train_manifest.num_semantic_classes);
    if (cfg.get_bool("train.validate")) in.val = &data.val;

    std::string log_text;
    in.on_epoch = [&](const train::EpochStats& s) {
        log_text += stats_line(s) + "\n";
        util::write_file_atomic(log_path, log_text);
        progress(stats_line(s));
    };
    progress("training " + train::to_string(stage) + " on " + std::to_string(data.train.size()) + " samples");
    const auto result = train::train_stage(tc, model_cfg, data.train, in);
    save_checkpoint(ckpt_path, result.checkpoint);
    progress("saved " + ckpt_path.string());
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt_path, const std::string& protocol_flag,
             const std::string& pathway_flag, const std::string& out_flag) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto protocol = eval::parse_protocol(protocol_flag.empty() ? cfg.get("eval.protocol") : protocol_flag);
    auto pathway = eval::parse_pathway(pathway_flag.empty() ? cfg.get("eval.pathway") : pathway_flag);
    if (pathway_flag.empty() && ckpt.stage == "branch_rgb") pathway = eval::Pathway::Rgb;
    if (pathway_flag.empty() && ckpt.stage == "branch_semantic") pathway = eval::Pathway::Semantic;

    const auto manifest = [&] {
        auto m = data::load_manifest(cfg.data_root(), data::Split::Val);
        if (cfg.get_int("data.semantic_subset") > 0) {
            m = data::restrict_semantic_classes(m, cfg.get_int("data.semantic_subset"), cfg.get_u64("data.subset_seed"));
        }
        return m;
    }();
    if (manifest.num_scene_classes() != ckpt.model_config.num_scene_classes()) {
        throw ConfigError("checkpoint has K=" + std::to_string(ckpt.model_config.num_scene_classes()) +
                          " but the dataset has K=" + std::to_string(manifest.num_scene_classes()));
    }
    const auto samples = data::load_all(manifest);
    auto model = train::model_from_checkpoint(ckpt);
    progress("evaluating " + eval::to_string(pathway) + " pathway, " + eval::to_string(protocol) + " protocol, " +
             std::to_string(samples.size()) + " samples");
    const auto records = eval::predict(*model, samples, pathway, protocol, cfg.get_int("eval.batch_size"));
    const auto report = eval::compute_metrics(records, manifest.num_scene_classes(), protocol);
    const fs::path out = out_flag.empty() ? cfg.output_dir() : fs::path(out_flag);
    eval::write_metrics(out / "metrics.json", report, manifest.scene_classes);
    eval::write_predictions(out / "predictions.jsonl", records);
    progress(eval::to_json(report).dump());
    return kExitOk;
}

int cmd_ablate(const RunConfig& cfg, const std::string& axis) {
    const auto result = experiment::run_ablation(cfg, axis, progress);
    const fs::path out = cfg.output_dir();
    util::write_file_atomic(out / ("ablation_" + axis + ".json"), result.dump(2) + "\n");
    const std::string table = experiment::ablation_table(result);
    util::write_file_atomic(out / ("ablation_" + axis + ".md"), table);
    std::cout << table;
    return kExitOk;
}

int cmd_explain(const RunConfig& cfg, const std::string& ckpt_path, const std::string& ids_flag,
                const std::string& pathway_flag, const std::string& split_flag, const std::string& out_flag) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto pathway = eval::parse_pathway(pathway_flag.empty() ? cfg.get("eval.pathway") : pathway_flag);
    auto manifest = data::load_manifest(cfg.data_root(), data::parse_split(split_flag));
    if (cfg.get_int("data.semantic_subset") > 0) {
        manifest = data::restrict_semantic_classes(manifest, cfg.get_int("data.semantic_subset"),
                                                   cfg.get_u64("data.subset_seed"));
    }
    std::vector<std::size_t> chosen;
    if (ids_flag.empty()) {
        const auto n = std::min<std::size_t>(manifest.samples.size(), cfg.get_int("explain.max_samples"));
        for (std::size_t i = 0; i < n; ++i) chosen.push_back(i);
    } else {
        std::stringstream ss(ids_flag);
        std::string id;
        while (std::getline(ss, id, ',')) {
            const auto it = std::find_if(manifest.samples.begin(), manifest.samples.end(),
                                         [&](const data::SampleRef& r) { return r.id == id; });
            if (it == manifest.samples.end()) throw ConfigError("--sample-ids: no sample '" + id + "' in split");
            chosen.push_back(static_cast<std::size_t>(it - manifest.samples.begin()));
        }
    }
    if (chosen.empty()) throw ConfigError("no samples to explain");

    auto model = train::model_from_checkpoint(ckpt);
    const fs::path out = out_flag.empty() ? cfg.output_dir() / "explain" : fs::path(out_flag);
    interp::ObjectSceneCorrelation acc(manifest.num_semantic_classes);
    nlohmann::json cams = nlohmann::json::array();
    for (std::size_t i : chosen) {
        const data::Sample prepared = data::center_crop(data::load_sample(manifest, i));
        const auto cam = interp::explain_sample(*model, prepared, pathway);
        const std::string stem = prepared.id + "_" + eval::to_string(pathway);
        util::write_file_atomic(out / (stem + ".png"), interp::render_overlay_png(cam, prepared.image));
        util::write_file_atomic(out / (stem + ".cam"), interp::encode_cam(cam));
        interp::accumulate_object_attention(cam, prepared.semantics, acc);
        nlohmann::json top = nlohmann::json::array();
        for (const auto& [c, lp] : cam.top3) top.push_back({{"class", c}, {"log_prob", lp}});
        cams.push_back({{"id", prepared.id}, {"source", interp::to_string(cam.source)}, {"predicted_class", cam.predicted_class},
                        {"top3", top}});
    }
    const auto report = interp::emit_correlation_report(acc, manifest.semantic_class_names, manifest.semantic_groups);
    util::write_file_atomic(out / "correlation.json",
                            nlohmann::json{{"pathway", eval::to_string(pathway)},
                                           {"sample_count", acc.sample_count},
                                           {"entries", interp::to_json(report)},
                                           {"cams", cams}}
                                    .dump(2) +
                                "\n");
    util::write_file_atomic(out / "correlation.png", interp::render_bar_chart_png(report));
    progress("wrote " + std::to_string(chosen.size()) + " CAMs and a correlation report to " + out.string());
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Semantic-aware scene recognition: data generation, training, evaluation, ablation, CAMs"};
    app.require_subcommand(1);
    Common common;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "key = value config file");
        sub->add_option("--set", common.overrides, "override a config key (key=value), repeatable");
    };

    std::string out, stage, resume, checkpoint, protocol, pathway, axis, ids, split = "val";

    auto* gen = app.add_subcommand("generate", "write a synthetic toy dataset");
    add_common(gen);
    gen->add_option("--out", out, "dataset root (default data.root)");

    auto* tr = app.add_subcommand("train", "train one stage");
    add_common(tr);
    tr->add_option("--stage", stage, "rgb | semantic | fusion")->required();
    tr->add_option("--resume", resume, "checkpoint of the same stage to continue from");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the val split");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ev->add_option("--protocol", protocol, "single | ten_crop");
    ev->add_option("--pathway", pathway, "fused | rgb | semantic");
    ev->add_option("--out", out, "report directory (default output.dir)");

    auto* ab = app.add_subcommand("ablate", "train and compare variants along one axis");
    add_common(ab);
    ab->add_option("--axis", axis, "mechanism | fusion_depth | semantic_backbone | semantic_subset")->required();

    auto* ex = app.add_subcommand("explain", "class activation maps and object-scene correlation");
    add_common(ex);
    ex->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ex->add_option("--sample-ids", ids, "comma-separated sample ids (default first explain.max_samples)");
    ex->add_option("--pathway", pathway, "fused | rgb | semantic");
    ex->add_option("--split", split, "train | val");
    ex->add_option("--out", out, "output directory (default <output.dir>/explain)");

    auto* defaults = app.add_subcommand("defaults", "print every config key with its default");
    add_common(defaults);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const RunConfig cfg = build_config(common);
        if (gen->parsed()) return cmd_generate(cfg, out);
        if (tr->parsed()) return cmd_train(cfg, stage, resume);
        if (ev->parsed()) return cmd_eval(cfg, checkpoint, protocol, pathway, out);
        if (ab->parsed()) return cmd_ablate(cfg, axis);
        if (ex->parsed()) return cmd_explain(cfg, checkpoint, ids, pathway, split, out);
        if (defaults->parsed()) {
            std::cout << cfg.dump();
            return kExitOk;
        }
    } catch (const DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace semattn::cli
