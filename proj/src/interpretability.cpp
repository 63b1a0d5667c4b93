#include "semattn/interpretability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semattn/data/io.hpp"
#include "semattn/data/transforms.hpp"
#include "semattn/errors.hpp"
#include "semattn/util/binary.hpp"

namespace semattn::interp {

namespace {

constexpr char kCamMagic[4] = {'C', 'A', 'M', '1'};

std::vector<double> bilinear(const std::vector<double>& src, int h, int w, int out) {
    std::vector<double> dst(static_cast<std::size_t>(out) * out);
    const double sy = static_cast<double>(h) / out, sx = static_cast<double>(w) / out;
    for (int y = 0; y < out; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            const double top = (1 - wx) * src[y0 * w + x0] + wx * src[y0 * w + x1];
            const double bottom = (1 - wx) * src[y1 * w + x0] + wx * src[y1 * w + x1];
            dst[static_cast<std::size_t>(y) * out + x] = (1 - wy) * top + wy * bottom;
        }
    }
    return dst;
}

void normalise(std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double min = *lo, range = *hi - *lo;
    if (!(range > 0)) {
        std::fill(v.begin(), v.end(), 0.0);
        return;
    }
    for (double& x : v) x = (x - min) / range;
}

std::array<unsigned char, 3> jet(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto channel = [t](double centre) {
        return std::clamp(1.5 - std::abs(4.0 * t - centre), 0.0, 1.0);
    };
    return {static_cast<unsigned char>(std::lround(255 * channel(3.0))),
            static_cast<unsigned char>(std::lround(255 * channel(2.0))),
            static_cast<unsigned char>(std::lround(255 * channel(1.0)))};
}

std::vector<std::pair<int, double>> top3_of(const Tensor& log_probs) {
    const int k = log_probs.dim(1);
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return log_probs[a] > log_probs[b]; });
    std::vector<std::pair<int, double>> out;
    for (int i = 0; i < std::min(3, k); ++i) out.emplace_back(order[i], log_probs[order[i]]);
    return out;
}

}  // namespace

std::string to_string(CamSource s) {
    switch (s) {
        case CamSource::RgbBranch: return "rgb_branch";
        case CamSource::SemanticBranch: return "semantic_branch";
        case CamSource::Fused: return "fused";
    }
    return "fused";
}

std::vector<double> weighted_channel_sum(const Tensor& features, const Tensor& weights, int class_index) {
    require_rank(features, 3, "CAM features");
    require_rank(weights, 2, "CAM classifier weights");
    const int c = features.dim(0), h = features.dim(1), w = features.dim(2);
    if (weights.dim(1) != c) throw ShapeError("classifier expects " + std::to_string(weights.dim(1)) + " channels, features have " + std::to_string(c));
    if (class_index < 0 || class_index >= weights.dim(0)) {
        throw RangeError("class index " + std::to_string(class_index) + " outside [0, " + std::to_string(weights.dim(0)) + ")");
    }
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> sum(plane, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        const double wt = weights[static_cast<std::size_t>(class_index) * c + ch];
        const Scalar* f = features.data() + ch * plane;
        for (std::size_t p = 0; p < plane; ++p) sum[p] += wt * f[p];
    }
    return sum;
}

ActivationMap compute_cam(const Tensor& features, const Tensor& weights, int class_index, int out_size) {
    std::vector<double> raw = weighted_channel_sum(features, weights, class_index);
    ActivationMap cam;
    cam.height = cam.width = out_size;
    cam.values = bilinear(raw, features.dim(1), features.dim(2), out_size);
    normalise(cam.values);
    cam.predicted_class = class_index;
    return cam;
}

ActivationMap explain_sample(SceneModel& model, const data::Sample& prepared, eval::Pathway pathway) {
    const std::vector<data::Sample> one{prepared};
    Tensor log_probs, features, weights;
    CamSource source = CamSource::Fused;
    switch (pathway) {
        case eval::Pathway::Rgb: {
            const Tensor f = model.rgb().forward(data::images_to_tensor(std::vector{prepared.image}), nn::Mode::Eval);
            log_probs = model.rgb_head().forward(f, nn::Mode::Eval);
            features = f.sample(0);
            weights = model.rgb_head().linear().weight().value;
            source = CamSource::RgbBranch;
            break;
        }
        case eval::Pathway::Semantic: {
            const Tensor f =
                model.semantic().forward(data::semantics_to_tensor(std::vector{prepared.semantics}), nn::Mode::Eval);
            log_probs = model.semantic_head().forward(f, nn::Mode::Eval);
            features = f.sample(0);
            weights = model.semantic_head().linear().weight().value;
            source = CamSource::SemanticBranch;
            break;
        }
        case eval::Pathway::Fused:
            log_probs = eval::predict_batch(model, one, pathway);
            features = model.fusion().last_fused().sample(0);
            weights = model.fusion().classifier().weight().value;
            break;
    }
    auto top = top3_of(log_probs);
    ActivationMap cam = compute_cam(features, weights, top.front().first);
    cam.source = source;
    cam.top3 = std::move(top);
    return cam;
}

void ObjectSceneCorrelation::merge(const ObjectSceneCorrelation& other) {
    if (other.attention.size() != attention.size()) throw ShapeError("cannot merge accumulators of different L");
    for (std::size_t i = 0; i < attention.size(); ++i) attention[i] += other.attention[i];
    sample_count += other.sample_count;
    total_mass += other.total_mass;
}

void accumulate_object_attention(const ActivationMap& cam, const data::SemanticScoreTensor& semantics,
                                 ObjectSceneCorrelation& acc) {
    if (cam.height != semantics.height || cam.width != semantics.width) {
        throw ShapeError("CAM " + std::to_string(cam.height) + "x" + std::to_string(cam.width) +
                         " not aligned with semantics " + std::to_string(semantics.height) + "x" +
                         std::to_string(semantics.width));
    }
    if (acc.attention.size() != static_cast<std::size_t>(semantics.num_classes)) {
        throw ShapeError("accumulator size does not match L");
    }
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const double v = cam.at(y, x);
            const std::uint16_t lab = semantics.top_label(y, x);
            if (lab == data::kNoLabel) continue;
            acc.attention[lab] += v;
            acc.total_mass += v;
        }
    }
    ++acc.sample_count;
}

std::vector<CorrelationEntry> emit_correlation_report(const ObjectSceneCorrelation& acc,
                                                      const std::vector<std::string>& label_names,
                                                      const std::vector<std::string>& groups) {
    const double total = std::accumulate(acc.attention.begin(), acc.attention.end(), 0.0);
    if (!(total > 0)) throw RangeError("correlation report needs a nonempty accumulation");
    std::vector<int> order(acc.attention.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return acc.attention[a] > acc.attention[b]; });
    std::vector<CorrelationEntry> out;
    for (int l : order) {
        CorrelationEntry e;
        e.label = l;
        e.label_name = static_cast<std::size_t>(l) < label_names.size() && !label_names[l].empty()
                           ? label_names[l]
                           : "label_" + std::to_string(l);
        e.group = static_cast<std::size_t>(l) < groups.size() ? groups[l] : "both";
        e.weight = acc.attention[l] / total;
        out.push_back(std::move(e));
    }
    return out;
}

nlohmann::json to_json(const std::vector<CorrelationEntry>& report) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : report) {
        arr.push_back({{"label", e.label}, {"label_name", e.label_name}, {"group", e.group}, {"weight", e.weight}});
    }
    return arr;
}

std::string encode_cam(const ActivationMap& cam) {
    std::string out(kCamMagic, 4);
    util::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cam.height));
    util::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cam.width));
    util::put_le<std::uint32_t>(out, 0);
    for (double v : cam.values) util::put_le<float>(out, static_cast<float>(v));
    return out;
}

ActivationMap decode_cam(const std::string& bytes) {
    util::ByteReader reader(bytes, "CAM");
    if (reader.take(4) != std::string(kCamMagic, 4)) throw FormatError("CAM: bad magic");
    ActivationMap cam;
    cam.height = static_cast<int>(reader.get<std::uint32_t>());
    cam.width = static_cast<int>(reader.get<std::uint32_t>());
    reader.get<std::uint32_t>();
    const std::size_t n = static_cast<std::size_t>(cam.height) * cam.width;
    if (reader.remaining() != n * sizeof(float)) throw FormatError("CAM: payload size does not match header");
    cam.values.resize(n);
    for (double& v : cam.values) v = reader.get<float>();
    return cam;
}

std::string render_overlay_png(const ActivationMap& cam, const data::RgbImage& image, double alpha) {
    if (image.height != cam.height || image.width != cam.width) throw ShapeError("overlay image and CAM sizes differ");
    std::vector<unsigned char> rgb(static_cast<std::size_t>(cam.height) * cam.width * 3);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const auto heat = jet(cam.at(y, x));
            for (int c = 0; c < 3; ++c) {
                const double v = (1 - alpha) * image.at(y, x, c) * 255.0 + alpha * heat[c];
                rgb[(static_cast<std::size_t>(y) * cam.width + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return data::encode_png_rgb8(cam.height, cam.width, rgb);
}

std::string render_bar_chart_png(const std::vector<CorrelationEntry>& report, int max_bars) {
    const int bars = std::max(1, std::min(max_bars, static_cast<int>(report.size())));
    const int bar_h = 12, gap = 4, width = 420, margin = 10;
    const int height = margin * 2 + bars * (bar_h + gap);
    std::vector<unsigned char> rgb(static_cast<std::size_t>(height) * width * 3, 255);
    const double top = report.empty() ? 1.0 : std::max(report.front().weight, 1e-12);
    for (int i = 0; i < bars && i < static_cast<int>(report.size()); ++i) {
        const auto& e = report[i];
        std::array<unsigned char, 3> colour{230, 150, 40};
        if (e.group == "indoor") colour = {50, 110, 200};
        if (e.group == "outdoor") colour = {60, 170, 80};
        const int len = static_cast<int>(std::lround((width - 2 * margin) * e.weight / top));
        const int y0 = margin + i * (bar_h + gap);
        for (int y = y0; y < y0 + bar_h; ++y) {
            for (int x = margin; x < margin + len; ++x) {
                for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] = colour[c];
            }
        }
    }
    return data::encode_png_rgb8(height, width, rgb);
}

}  // namespace semattn::interp
