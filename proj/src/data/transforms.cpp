#include "semattn/data/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "semattn/errors.hpp"

namespace semattn::data {

namespace {

std::pair<int, int> resized_dims(int height, int width, int target) {
    if (height < 1 || width < 1) {
        throw ShapeError("zero-area image " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (height <= width) {
        const int w = static_cast<int>(std::lround(static_cast<double>(width) * target / height));
        return {target, std::max(w, target)};
    }
    const int h = static_cast<int>(std::lround(static_cast<double>(height) * target / width));
    return {std::max(h, target), target};
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void require_window(int height, int width, const CropWindow& w) {
    if (w.top < 0 || w.left < 0 || w.top + w.size > height || w.left + w.size > width) {
        throw ShapeError("crop window outside " + std::to_string(height) + "x" + std::to_string(width) + " image");
    }
}

void gaussian_blur(RgbImage& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    if (radius < 1) return;
    std::vector<double> kernel(2 * radius + 1);
    double total = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += kernel[i + radius];
    }
    for (auto& k : kernel) k /= total;
    RgbImage tmp = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, img.width - 1);
                    acc += kernel[i + radius] * img.at(y, xx, c);
                }
                tmp.at(y, x, c) = static_cast<float>(acc);
            }
        }
    }
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, img.height - 1);
                    acc += kernel[i + radius] * tmp.at(yy, x, c);
                }
                img.at(y, x, c) = clamp01(acc);
            }
        }
    }
}

float percentile(std::vector<float> values, double pct) {
    const auto idx = static_cast<std::size_t>(std::lround(pct / 100.0 * static_cast<double>(values.size() - 1)));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
    return values[idx];
}

void sort_slots(SemanticScoreTensor& sem, std::size_t p) {
    std::array<std::pair<std::uint16_t, float>, kTopSlots> slots;
    for (int k = 0; k < kTopSlots; ++k) slots[k] = {sem.labels[p + k], sem.scores[p + k]};
    std::stable_sort(slots.begin(), slots.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (int k = 0; k < kTopSlots; ++k) {
        sem.labels[p + k] = slots[k].first;
        sem.scores[p + k] = slots[k].second;
    }
}

}  // namespace

RgbImage resize_smaller_edge(const RgbImage& image, int target) {
    const auto [oh, ow] = resized_dims(image.height, image.width, target);
    if (oh == image.height && ow == image.width) return image;
    RgbImage out(oh, ow);
    out.source_path = image.source_path;
    const double sy = static_cast<double>(image.height) / oh;
    const double sx = static_cast<double>(image.width) / ow;
    for (int y = 0; y < oh; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
                const double bottom = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
                out.at(y, x, c) = clamp01((1 - wy) * top + wy * bottom);
            }
        }
    }
    return out;
}

SemanticScoreTensor resize_smaller_edge(const SemanticScoreTensor& sem, int target) {
    const auto [oh, ow] = resized_dims(sem.height, sem.width, target);
    if (oh == sem.height && ow == sem.width) return sem;
    SemanticScoreTensor out(oh, ow, sem.num_classes);
    for (int y = 0; y < oh; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * sem.height / oh), sem.height - 1);
        for (int x = 0; x < ow; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * sem.width / ow), sem.width - 1);
            for (int k = 0; k < kTopSlots; ++k) {
                out.labels[out.slot(y, x, k)] = sem.labels[sem.slot(sy, sx, k)];
                out.scores[out.slot(y, x, k)] = sem.scores[sem.slot(sy, sx, k)];
            }
        }
    }
    return out;
}

CropWindow choose_crop(int height, int width, CropMode mode, std::mt19937_64* rng) {
    if (height < kCropSize || width < kCropSize) {
        throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) + " smaller than crop");
    }
    CropWindow w;
    if (mode == CropMode::EvalCenter) {
        w.top = (height - kCropSize) / 2;
        w.left = (width - kCropSize) / 2;
        return w;
    }
    if (rng == nullptr) throw ConfigError("random crop requires an RNG");
    w.top = std::uniform_int_distribution<int>(0, height - kCropSize)(*rng);
    w.left = std::uniform_int_distribution<int>(0, width - kCropSize)(*rng);
    return w;
}

RgbImage crop(const RgbImage& image, const CropWindow& window) {
    require_window(image.height, image.width, window);
    RgbImage out(window.size, window.size);
    out.source_path = image.source_path;
    for (int y = 0; y < window.size; ++y) {
        for (int x = 0; x < window.size; ++x) {
            const int sx = window.flip ? window.left + window.size - 1 - x : window.left + x;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(window.top + y, sx, c);
        }
    }
    return out;
}

SemanticScoreTensor crop(const SemanticScoreTensor& sem, const CropWindow& window) {
    require_window(sem.height, sem.width, window);
    SemanticScoreTensor out(window.size, window.size, sem.num_classes);
    for (int y = 0; y < window.size; ++y) {
        for (int x = 0; x < window.size; ++x) {
            const int sx = window.flip ? window.left + window.size - 1 - x : window.left + x;
            for (int k = 0; k < kTopSlots; ++k) {
                out.labels[out.slot(y, x, k)] = sem.labels[sem.slot(window.top + y, sx, k)];
                out.scores[out.slot(y, x, k)] = sem.scores[sem.slot(window.top + y, sx, k)];
            }
        }
    }
    return out;
}

RgbImage resize_and_crop(const RgbImage& image, CropMode mode, std::mt19937_64* rng) {
    const RgbImage resized = resize_smaller_edge(image, kResizeEdge);
    return crop(resized, choose_crop(resized.height, resized.width, mode, rng));
}

std::array<CropWindow, 10> ten_crop_windows(int height, int width) {
    if (height < kCropSize || width < kCropSize) throw ShapeError("ten-crop input smaller than crop size");
    const int bottom = height - kCropSize;
    const int right = width - kCropSize;
    std::array<CropWindow, 10> w{};
    w[0] = {0, 0, kCropSize, false};
    w[1] = {0, right, kCropSize, false};
    w[2] = {bottom, 0, kCropSize, false};
    w[3] = {bottom, right, kCropSize, false};
    w[4] = {bottom / 2, right / 2, kCropSize, false};
    for (int i = 0; i < 5; ++i) {
        w[i + 5] = w[i];
        w[i + 5].flip = true;
    }
    return w;
}

std::vector<RgbImage> ten_crop(const RgbImage& image) {
    const RgbImage resized = resize_smaller_edge(image, kResizeEdge);
    std::vector<RgbImage> out;
    out.reserve(10);
    for (const auto& w : ten_crop_windows(resized.height, resized.width)) out.push_back(crop(resized, w));
    return out;
}

std::vector<SemanticScoreTensor> ten_crop(const SemanticScoreTensor& sem) {
    const SemanticScoreTensor resized = resize_smaller_edge(sem, kResizeEdge);
    std::vector<SemanticScoreTensor> out;
    out.reserve(10);
    for (const auto& w : ten_crop_windows(resized.height, resized.width)) out.push_back(crop(resized, w));
    return out;
}

SemanticScoreTensor sparsify(const Tensor& dense) {
    require_rank(dense, 3, "sparsify input");
    const int num_classes = dense.dim(0), h = dense.dim(1), w = dense.dim(2);
    if (num_classes > kNoLabel) throw RangeError("too many semantic classes for u16 labels");
    SemanticScoreTensor out(h, w, num_classes);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            std::array<int, kTopSlots> best_label{-1, -1, -1};
            std::array<Scalar, kTopSlots> best_score{-1, -1, -1};
            for (int l = 0; l < num_classes; ++l) {
                const Scalar v = dense[l * plane + pix];
                if (!std::isfinite(v) || v < 0) throw FormatError("sparsify: scores must be finite and nonnegative");
                // Strict comparison keeps the lower label on ties.
                int pos = kTopSlots;
                while (pos > 0 && v > best_score[pos - 1]) --pos;
                if (pos == kTopSlots) continue;
                for (int k = kTopSlots - 1; k > pos; --k) {
                    best_score[k] = best_score[k - 1];
                    best_label[k] = best_label[k - 1];
                }
                best_score[pos] = v;
                best_label[pos] = l;
            }
            for (int k = 0; k < kTopSlots; ++k) {
                const std::size_t s = out.slot(y, x, k);
                if (best_label[k] < 0) {
                    out.labels[s] = kNoLabel;
                    out.scores[s] = 0.0F;
                } else {
                    out.labels[s] = static_cast<std::uint16_t>(best_label[k]);
                    out.scores[s] = static_cast<float>(best_score[k]);
                }
            }
        }
    }
    return out;
}

Tensor densify(const SemanticScoreTensor& sem) {
    Tensor out({sem.num_classes, sem.height, sem.width});
    const std::size_t plane = static_cast<std::size_t>(sem.height) * sem.width;
    for (std::size_t pix = 0; pix < plane; ++pix) {
        for (int k = 0; k < kTopSlots; ++k) {
            const std::uint16_t lab = sem.labels[pix * kTopSlots + k];
            if (lab == kNoLabel) continue;
            if (lab >= sem.num_classes) {
                throw FormatError("densify: label " + std::to_string(lab) + " >= L=" + std::to_string(sem.num_classes));
            }
            out[lab * plane + pix] = sem.scores[pix * kTopSlots + k];
        }
    }
    return out;
}

void apply_label_subset(SemanticScoreTensor& sem, const std::vector<bool>& active) {
    if (active.size() != static_cast<std::size_t>(sem.num_classes)) {
        throw ShapeError("label subset mask size does not match L");
    }
    for (std::size_t p = 0; p < sem.labels.size(); p += kTopSlots) {
        bool changed = false;
        for (int k = 0; k < kTopSlots; ++k) {
            const std::uint16_t lab = sem.labels[p + k];
            if (lab != kNoLabel && lab < active.size() && !active[lab] && sem.scores[p + k] != 0.0F) {
                sem.scores[p + k] = 0.0F;
                changed = true;
            }
        }
        if (changed) sort_slots(sem, p);
    }
}

RgbImage photometric(const RgbImage& image, const AugmentConfig& cfg, std::mt19937_64& rng) {
    RgbImage out = image;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Every draw happens regardless of the outcome so the stream stays aligned.
    const bool do_blur = unit(rng) < cfg.blur_probability;
    const double sigma = unit(rng) * cfg.blur_sigma_max;
    const bool do_contrast = unit(rng) < cfg.contrast_probability;
    const bool do_noise = unit(rng) < cfg.noise_probability;
    const bool do_bright = unit(rng) < cfg.brightness_probability;
    const double delta = (2 * unit(rng) - 1) * cfg.brightness_delta;

    if (do_blur && sigma > 1e-3) gaussian_blur(out, sigma);
    if (do_contrast) {
        const float lo = percentile(out.pixels, cfg.contrast_low_percentile);
        const float hi = percentile(out.pixels, cfg.contrast_high_percentile);
        if (hi - lo > 1e-6F) {
            for (auto& v : out.pixels) v = clamp01((static_cast<double>(v) - lo) / (hi - lo));
        }
    }
    if (do_noise) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (auto& v : out.pixels) v = clamp01(v + noise(rng));
    }
    if (do_bright) {
        for (auto& v : out.pixels) v = clamp01(v + delta);
    }
    return out;
}

Sample augment(const Sample& sample, std::uint64_t seed, const AugmentConfig& cfg) {
    if (sample.image.height != sample.semantics.height || sample.image.width != sample.semantics.width) {
        throw ShapeError("sample '" + sample.id + "': RGB and semantic dimensions differ");
    }
    std::mt19937_64 rng(seed);
    const RgbImage image = resize_smaller_edge(sample.image, kResizeEdge);
    const SemanticScoreTensor sem = resize_smaller_edge(sample.semantics, kResizeEdge);
    CropWindow window = choose_crop(image.height, image.width, CropMode::TrainRandom, &rng);
    window.flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.flip_probability;

    Sample out;
    out.id = sample.id;
    out.scene_label = sample.scene_label;
    out.image = crop(image, window);
    out.semantics = crop(sem, window);
    if (cfg.photometric) out.image = photometric(out.image, cfg, rng);
    return out;
}

Sample center_crop(const Sample& sample) {
    if (sample.image.height != sample.semantics.height || sample.image.width != sample.semantics.width) {
        throw ShapeError("sample '" + sample.id + "': RGB and semantic dimensions differ");
    }
    const RgbImage image = resize_smaller_edge(sample.image, kResizeEdge);
    const SemanticScoreTensor sem = resize_smaller_edge(sample.semantics, kResizeEdge);
    const CropWindow window = choose_crop(image.height, image.width, CropMode::EvalCenter, nullptr);
    Sample out;
    out.id = sample.id;
    out.scene_label = sample.scene_label;
    out.image = crop(image, window);
    out.semantics = crop(sem, window);
    return out;
}

Tensor images_to_tensor(std::span<const RgbImage> images) {
    if (images.empty()) throw ShapeError("empty image batch");
    const int h = images.front().height, w = images.front().width;
    Tensor out({static_cast<int>(images.size()), 3, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t n = 0; n < images.size(); ++n) {
        const RgbImage& img = images[n];
        if (img.height != h || img.width != w) throw ShapeError("image batch with mixed sizes");
        Scalar* dst = out.data() + n * 3 * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            for (int c = 0; c < 3; ++c) dst[c * plane + p] = img.pixels[p * 3 + c];
        }
    }
    return out;
}

Tensor semantics_to_tensor(std::span<const SemanticScoreTensor> sems) {
    if (sems.empty()) throw ShapeError("empty semantic batch");
    const auto& first = sems.front();
    Tensor out({static_cast<int>(sems.size()), first.num_classes, first.height, first.width});
    const std::size_t block = static_cast<std::size_t>(first.num_classes) * first.height * first.width;
    for (std::size_t n = 0; n < sems.size(); ++n) {
        const auto& s = sems[n];
        if (s.height != first.height || s.width != first.width || s.num_classes != first.num_classes) {
            throw ShapeError("semantic batch with mixed shapes");
        }
        const Tensor dense = densify(s);
        std::copy_n(dense.data(), block, out.data() + n * block);
    }
    return out;
}

}  // namespace semattn::data
