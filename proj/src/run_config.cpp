#include "semattn/run_config.hpp"

#include <cstdlib>
#include <sstream>

#include "semattn/errors.hpp"
#include "semattn/util/fs.hpp"

namespace semattn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
    entries_ = {
        {"data.root", {"", "dataset root; empty falls back to $SEMATTN_DATA_ROOT"}},
        {"data.semantic_subset", {"0", "keep this many randomly chosen semantic labels (0 = all)"}},
        {"data.subset_seed", {"0", "seed of the semantic label subset"}},
        {"output.dir", {"runs/default", "directory for checkpoints, logs and reports"}},

        {"model.rgb.backbone", {"residual18", "residual18 | residual50 | tiny_residual"}},
        {"model.rgb.width_multiplier", {"1", "scales every RGB stage width"}},
        {"model.semantic.backbone", {"conv4", "conv4 | conv3 | resnet18_style"}},
        {"model.semantic.use_cham", {"true", "channel attention between semantic blocks"}},
        {"model.semantic.channel_plan", {"", "comma-separated block widths ending in 512 (empty = backbone default)"}},
        {"model.semantic.cham_reduction_ratio", {"0", "ChAM reduction ratio r (0 = 16 when c >= 16, else 1)"}},
        {"fusion.mechanism", {"g_rgb_h", "additive | concat | hadamard | g_rgb_h | g_sem_h"}},
        {"fusion.conv_plan", {"two_3x3", "none | two_1x1 | two_3x3 | three_3x3"}},
        {"fusion.dropout_p", {"0.5", "dropout before the scene classifier"}},

        {"train.learning_rate", {"0.1", "initial learning rate"}},
        {"train.momentum", {"0.9", "SGD momentum"}},
        {"train.weight_decay", {"0.0001", "L2 decay on conv/linear weights"}},
        {"train.batch_size", {"32", "mini-batch size"}},
        {"train.max_epochs", {"30", "epochs per stage"}},
        {"train.fusion_epochs", {"0", "epochs for the fusion stage (0 = train.max_epochs)"}},
        {"train.fusion_learning_rate", {"0", "initial learning rate for the fusion stage (0 = train.learning_rate)"}},
        {"train.lr_step_epochs", {"15", "decay the learning rate every this many epochs"}},
        {"train.lr_gamma", {"0.1", "learning-rate decay factor"}},
        {"train.optimizer", {"sgd_momentum", "optimizer (sgd_momentum)"}},
        {"train.seed", {"0", "seed for initialisation, shuffling, augmentation and dropout"}},
        {"train.augment", {"true", "training augmentation for branch stages"}},
        {"train.fusion_augment", {"false", "augmentation during the fusion stage (false caches branch features)"}},
        {"train.rgb_checkpoint", {"", "RGB branch checkpoint for the fusion stage (default <output.dir>/branch_rgb.ckpt)"}},
        {"train.semantic_checkpoint",
         {"", "semantic branch checkpoint for the fusion stage (default <output.dir>/branch_semantic.ckpt)"}},
        {"train.validate", {"true", "evaluate the val split after every epoch"}},

        {"augment.flip_probability", {"0.5", "horizontal flip probability"}},
        {"augment.photometric", {"true", "enable photometric ops on RGB"}},
        {"augment.blur_probability", {"0.5", "gaussian blur probability"}},
        {"augment.blur_sigma_max", {"1.5", "blur sigma drawn from [0, max]"}},
        {"augment.contrast_probability", {"0.5", "contrast normalisation probability"}},
        {"augment.contrast_low_percentile", {"2", "contrast stretch lower percentile"}},
        {"augment.contrast_high_percentile", {"98", "contrast stretch upper percentile"}},
        {"augment.noise_probability", {"0.5", "gaussian noise probability"}},
        {"augment.noise_sigma", {"0.02", "gaussian noise sigma"}},
        {"augment.brightness_probability", {"0.5", "brightness change probability"}},
        {"augment.brightness_delta", {"0.15", "brightness delta drawn from [-d, d]"}},

        {"eval.protocol", {"single", "single | ten_crop"}},
        {"eval.pathway", {"fused", "fused | rgb | semantic"}},
        {"eval.batch_size", {"16", "evaluation batch size"}},

        {"ablate.seeds", {"0,1,2", "training seeds averaged in ablations"}},
        {"ablate.mechanisms", {"additive,concat,hadamard,g_rgb_h,g_sem_h", "mechanisms for --axis mechanism"}},
        {"ablate.conv_plans", {"none,two_1x1,two_3x3,three_3x3", "conv plans for --axis fusion_depth"}},
        {"ablate.semantic_backbones", {"conv4,conv3,resnet18_style", "backbones for --axis semantic_backbone"}},
        {"ablate.subset_sizes", {"", "label-subset sizes for --axis semantic_subset (empty = L, L/3)"}},

        {"explain.max_samples", {"50", "samples accumulated into the correlation report when no ids are given"}},

        {"toy.num_scene_classes", {"4", "K"}},
        {"toy.num_semantic_classes", {"12", "L (label 0 is background)"}},
        {"toy.train_per_class", {"60", "train samples per scene class"}},
        {"toy.val_per_class", {"30", "val samples per scene class"}},
        {"toy.ambiguity", {"0.5", "probability that an object comes from the shared pool"}},
        {"toy.seed", {"0", "generator seed"}},
        {"toy.image_size", {"128", "generated image edge in pixels"}},
        {"toy.min_objects", {"2", "fewest objects per image"}},
        {"toy.max_objects", {"3", "most objects per image"}},
        {"toy.background_jitter", {"0.12", "std-dev of the per-image background tint"}},
        {"toy.texture_noise", {"0.05", "per-pixel texture noise"}},
        {"toy.corrupt_rate", {"0", "probability of flipping an object's semantic label"}},
    };
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(std::string("config file: ") + e.what());
    }
    load_text(text, path.string());
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.value = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.value;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'");
}

int RunConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const int i = std::stoi(v, &used);
        if (used == v.size()) return i;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        if (!v.empty() && v[0] != '-') {
            const auto i = std::stoull(v, &used);
            if (used == v.size()) return i;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string RunConfig::dump() const {
    std::string out;
    for (const auto& [key, e] : entries_) out += key + " = " + e.value + "  # " + e.help + "\n";
    return out;
}

std::filesystem::path RunConfig::data_root() const {
    if (!get("data.root").empty()) return get("data.root");
    if (const char* env = std::getenv("SEMATTN_DATA_ROOT"); env != nullptr && *env != '\0') return env;
    throw ConfigError("data.root is not set and SEMATTN_DATA_ROOT is empty");
}

std::filesystem::path RunConfig::output_dir() const { return get("output.dir"); }

namespace {

// Re-throws enum parse failures with the config key attached.
template <typename Fn>
auto keyed(const std::string& key, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

}  // namespace

ModelConfig RunConfig::model_config(int num_scene_classes, int num_semantic_classes) const {
    ModelConfig cfg;
    cfg.rgb.backbone = keyed("model.rgb.backbone", [&] { return parse_rgb_backbone(get("model.rgb.backbone")); });
    cfg.rgb.width_multiplier = get_double("model.rgb.width_multiplier");
    cfg.semantic.backbone =
        keyed("model.semantic.backbone", [&] { return parse_semantic_backbone(get("model.semantic.backbone")); });
    cfg.semantic.use_cham = get_bool("model.semantic.use_cham");
    for (const auto& c : get_list("model.semantic.channel_plan")) {
        try {
            cfg.semantic.channel_plan.push_back(std::stoi(c));
        } catch (const std::exception&) {
            throw ConfigError("model.semantic.channel_plan: '" + c + "' is not an integer");
        }
    }
    cfg.semantic.cham_reduction_ratio = get_int("model.semantic.cham_reduction_ratio");
    cfg.semantic.num_semantic_classes = num_semantic_classes;
    cfg.fusion.mechanism = keyed("fusion.mechanism", [&] { return parse_mechanism(get("fusion.mechanism")); });
    cfg.fusion.conv_plan = keyed("fusion.conv_plan", [&] { return parse_conv_plan(get("fusion.conv_plan")); });
    cfg.fusion.dropout_p = get_double("fusion.dropout_p");
    cfg.fusion.num_scene_classes = num_scene_classes;
    keyed("model", [&] {
        cfg.validate();
        return 0;
    });
    return cfg;
}

data::AugmentConfig RunConfig::augment_config() const {
    data::AugmentConfig a;
    a.flip_probability = get_double("augment.flip_probability");
    a.photometric = get_bool("augment.photometric");
    a.blur_probability = get_double("augment.blur_probability");
    a.blur_sigma_max = get_double("augment.blur_sigma_max");
    a.contrast_probability = get_double("augment.contrast_probability");
    a.contrast_low_percentile = get_double("augment.contrast_low_percentile");
    a.contrast_high_percentile = get_double("augment.contrast_high_percentile");
    a.noise_probability = get_double("augment.noise_probability");
    a.noise_sigma = get_double("augment.noise_sigma");
    a.brightness_probability = get_double("augment.brightness_probability");
    a.brightness_delta = get_double("augment.brightness_delta");
    return a;
}

train::TrainConfig RunConfig::train_config(train::Stage stage) const {
    train::TrainConfig t;
    t.stage = stage;
    t.learning_rate = get_double("train.learning_rate");
    t.momentum = get_double("train.momentum");
    t.weight_decay = get_double("train.weight_decay");
    t.batch_size = get_int("train.batch_size");
    t.max_epochs = get_int("train.max_epochs");
    if (stage == train::Stage::Fusion && get_int("train.fusion_epochs") > 0) t.max_epochs = get_int("train.fusion_epochs");
    if (stage == train::Stage::Fusion && get_double("train.fusion_learning_rate") > 0) {
        t.learning_rate = get_double("train.fusion_learning_rate");
    }
    t.lr_step_epochs = get_int("train.lr_step_epochs");
    t.lr_gamma = get_double("train.lr_gamma");
    t.optimizer = get("train.optimizer");
    t.seed = get_u64("train.seed");
    t.augment = stage == train::Stage::Fusion ? get_bool("train.fusion_augment") : get_bool("train.augment");
    t.augmentation = augment_config();
    t.validate();
    return t;
}

toy::ToySpec RunConfig::toy_spec() const {
    toy::ToySpec s;
    s.num_scene_classes = get_int("toy.num_scene_classes");
    s.num_semantic_classes = get_int("toy.num_semantic_classes");
    s.train_per_class = get_int("toy.train_per_class");
    s.val_per_class = get_int("toy.val_per_class");
    s.ambiguity = get_double("toy.ambiguity");
    s.seed = get_u64("toy.seed");
    s.image_size = get_int("toy.image_size");
    s.min_objects = get_int("toy.min_objects");
    s.max_objects = get_int("toy.max_objects");
    s.background_jitter = get_double("toy.background_jitter");
    s.texture_noise = get_double("toy.texture_noise");
    s.corrupt_rate = get_double("toy.corrupt_rate");
    s.validate();
    return s;
}

}  // namespace semattn
