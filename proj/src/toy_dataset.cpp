#include "semattn/toy_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "semattn/data/io.hpp"
#include "semattn/data/transforms.hpp"
#include "semattn/errors.hpp"
#include "semattn/util/seed.hpp"

namespace semattn::toy {

namespace {

using data::Split;

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h * 6.0, 6.0);
    const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
    Rgb out{0, 0, 0};
    if (hp < 1) out = {c, x, 0};
    else if (hp < 2) out = {x, c, 0};
    else if (hp < 3) out = {0, c, x};
    else if (hp < 4) out = {0, x, c};
    else if (hp < 5) out = {x, 0, c};
    else out = {c, 0, x};
    const double m = v - c;
    return {out.r + m, out.g + m, out.b + m};
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

std::string class_name(int k) { return "scene_" + std::to_string(k); }

std::string sample_id(Split split, int k, int index) {
    return data::to_string(split) + "_" + std::to_string(k) + "_" + std::to_string(index);
}

}  // namespace

void ToySpec::validate() const {
    if (num_scene_classes < 2) throw ConfigError("toy.num_scene_classes must be >= 2");
    if (num_semantic_classes < num_scene_classes + 1) {
        throw ConfigError("toy.num_semantic_classes must be >= num_scene_classes + 1");
    }
    if (ambiguity < 0 || ambiguity > 1) throw ConfigError("toy.ambiguity must lie in [0, 1]");
    if (corrupt_rate < 0 || corrupt_rate > 1) throw ConfigError("toy.corrupt_rate must lie in [0, 1]");
    if (train_per_class < 0 || val_per_class < 0) throw ConfigError("toy sample counts must be nonnegative");
    if (image_size < 16) throw ConfigError("toy.image_size must be >= 16");
    if (min_objects < 1 || max_objects < min_objects) throw ConfigError("toy object count range is invalid");
    if (background_jitter < 0 || texture_noise < 0) throw ConfigError("toy noise levels must be nonnegative");
}

LabelLayout label_layout(const ToySpec& spec) {
    spec.validate();
    const int objects = spec.num_semantic_classes - 1;
    const int per_class = std::max(1, objects / (spec.num_scene_classes + 1));
    LabelLayout layout;
    layout.signature.resize(spec.num_scene_classes);
    int next = 1;
    for (int k = 0; k < spec.num_scene_classes; ++k) {
        for (int j = 0; j < per_class; ++j) layout.signature[k].push_back(next++);
    }
    for (; next < spec.num_semantic_classes; ++next) layout.shared.push_back(next);
    // No spare labels: every object label doubles as the shared pool.
    if (layout.shared.empty()) {
        for (int l = 1; l < spec.num_semantic_classes; ++l) layout.shared.push_back(l);
    }
    return layout;
}

data::Sample generate_sample(const ToySpec& spec, Split split, int scene_class, int index) {
    const LabelLayout layout = label_layout(spec);
    if (scene_class < 0 || scene_class >= spec.num_scene_classes) throw RangeError("toy scene class out of range");
    std::mt19937_64 rng(derive_seed(spec.seed, "toy/" + sample_id(split, scene_class, index)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int n = spec.image_size;
    const Rgb base = hsv_to_rgb(static_cast<double>(scene_class) / spec.num_scene_classes, 0.55, 0.65);
    const Rgb tint{base.r + spec.background_jitter * gauss(rng), base.g + spec.background_jitter * gauss(rng),
                   base.b + spec.background_jitter * gauss(rng)};

    data::Sample s;
    s.id = sample_id(split, scene_class, index);
    s.scene_label = scene_class;
    s.image = data::RgbImage(n, n);
    std::vector<int> label_map(static_cast<std::size_t>(n) * n, layout.background);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            s.image.at(y, x, 0) = clamp01(tint.r + spec.texture_noise * gauss(rng));
            s.image.at(y, x, 1) = clamp01(tint.g + spec.texture_noise * gauss(rng));
            s.image.at(y, x, 2) = clamp01(tint.b + spec.texture_noise * gauss(rng));
        }
    }

    const int count = std::uniform_int_distribution<int>(spec.min_objects, spec.max_objects)(rng);
    for (int o = 0; o < count; ++o) {
        const bool shared = unit(rng) < spec.ambiguity;
        const auto& pool = shared ? layout.shared : layout.signature[scene_class];
        int label = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        if (unit(rng) < spec.corrupt_rate) {
            label = std::uniform_int_distribution<int>(1, spec.num_semantic_classes - 1)(rng);
        }
        const int h = std::uniform_int_distribution<int>(n / 5, (2 * n) / 5)(rng);
        const int w = std::uniform_int_distribution<int>(n / 5, (2 * n) / 5)(rng);
        const int top = std::uniform_int_distribution<int>(0, n - h)(rng);
        const int left = std::uniform_int_distribution<int>(0, n - w)(rng);
        const bool ellipse = unit(rng) < 0.5;
        const Rgb colour{unit(rng), unit(rng), unit(rng)};
        const double cy = top + (h - 1) / 2.0, cx = left + (w - 1) / 2.0;
        for (int y = top; y < top + h; ++y) {
            for (int x = left; x < left + w; ++x) {
                if (ellipse) {
                    const double dy = (y - cy) / (h / 2.0), dx = (x - cx) / (w / 2.0);
                    if (dy * dy + dx * dx > 1.0) continue;
                }
                label_map[static_cast<std::size_t>(y) * n + x] = label;
                s.image.at(y, x, 0) = clamp01(colour.r + spec.texture_noise * gauss(rng));
                s.image.at(y, x, 1) = clamp01(colour.g + spec.texture_noise * gauss(rng));
                s.image.at(y, x, 2) = clamp01(colour.b + spec.texture_noise * gauss(rng));
            }
        }
    }

    Tensor dense({spec.num_semantic_classes, n, n});
    const std::size_t plane = static_cast<std::size_t>(n) * n;
    for (std::size_t p = 0; p < plane; ++p) dense[label_map[p] * plane + p] = 1.0;
    s.semantics = data::sparsify(dense);
    return s;
}

data::DatasetIndex generate(const ToySpec& spec, const std::filesystem::path& root) {
    const LabelLayout layout = label_layout(spec);
    data::DatasetIndex index;
    for (int k = 0; k < spec.num_scene_classes; ++k) index.scene_classes.push_back(class_name(k));
    index.num_semantic_classes = spec.num_semantic_classes;
    index.semantic_class_names.assign(spec.num_semantic_classes, "");
    index.semantic_groups.assign(spec.num_semantic_classes, "both");
    index.semantic_class_names[layout.background] = "background";
    for (int k = 0; k < spec.num_scene_classes; ++k) {
        for (std::size_t j = 0; j < layout.signature[k].size(); ++j) {
            const int l = layout.signature[k][j];
            index.semantic_class_names[l] = "object_" + std::to_string(k) + "_" + std::to_string(j);
            index.semantic_groups[l] = k % 2 == 0 ? "indoor" : "outdoor";
        }
    }
    for (int l : layout.shared) {
        if (index.semantic_class_names[l].empty()) index.semantic_class_names[l] = "shared_" + std::to_string(l);
    }
    index.extra = {{"generator", "toy"},
                   {"ambiguity", spec.ambiguity},
                   {"seed", spec.seed},
                   {"image_size", spec.image_size},
                   {"corrupt_rate", spec.corrupt_rate},
                   {"background_jitter", spec.background_jitter},
                   {"texture_noise", spec.texture_noise}};

    for (Split split : {Split::Train, Split::Val}) {
        const int per_class = split == Split::Train ? spec.train_per_class : spec.val_per_class;
        auto& refs = split == Split::Train ? index.train : index.val;
        for (int k = 0; k < spec.num_scene_classes; ++k) {
            for (int i = 0; i < per_class; ++i) {
                const data::Sample s = generate_sample(spec, split, k, i);
                const std::string dir = data::to_string(split) + "/" + class_name(k) + "/";
                data::SampleRef ref{s.id, k, dir + s.id + ".png", dir + s.id + ".sem"};
                try {
                    data::write_png(root / ref.rgb_path, s.image);
                    data::write_sem(root / ref.sem_path, s.semantics);
                } catch (const IoError& e) {
                    throw IoError("toy generation under " + root.string() + ": " + e.what());
                }
                refs.push_back(std::move(ref));
            }
        }
    }
    data::write_index(root, index);
    return index;
}

double semantic_bag_oracle_accuracy(const ToySpec& spec, const std::vector<data::Sample>& samples) {
    if (samples.empty()) throw RangeError("oracle needs at least one sample");
    const LabelLayout layout = label_layout(spec);
    std::vector<int> owner(spec.num_semantic_classes, -1);
    for (int k = 0; k < spec.num_scene_classes; ++k) {
        for (int l : layout.signature[k]) owner[l] = k;
    }
    int correct = 0;
    for (const auto& s : samples) {
        std::vector<long> votes(spec.num_scene_classes, 0);
        for (int y = 0; y < s.semantics.height; ++y) {
            for (int x = 0; x < s.semantics.width; ++x) {
                const int lab = s.semantics.top_label(y, x);
                if (lab < spec.num_semantic_classes && owner[lab] >= 0) ++votes[owner[lab]];
            }
        }
        const int pred = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        if (pred == s.scene_label) ++correct;
    }
    return 100.0 * correct / static_cast<double>(samples.size());
}

}  // namespace semattn::toy
