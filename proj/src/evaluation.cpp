#include "semattn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "semattn/data/transforms.hpp"
#include "semattn/errors.hpp"
#include "semattn/util/fs.hpp"

namespace semattn::eval {

std::string to_string(Protocol p) { return p == Protocol::Single ? "single" : "ten_crop"; }

std::string to_string(Pathway p) {
    switch (p) {
        case Pathway::Fused: return "fused";
        case Pathway::Rgb: return "rgb";
        case Pathway::Semantic: return "semantic";
    }
    return "fused";
}

Protocol parse_protocol(const std::string& s) {
    if (s == "single") return Protocol::Single;
    if (s == "ten_crop") return Protocol::TenCrop;
    throw ConfigError("unknown protocol '" + s + "' (expected single or ten_crop)");
}

Pathway parse_pathway(const std::string& s) {
    if (s == "fused") return Pathway::Fused;
    if (s == "rgb") return Pathway::Rgb;
    if (s == "semantic") return Pathway::Semantic;
    throw ConfigError("unknown pathway '" + s + "' (expected rgb, semantic or fused)");
}

int rank_of(const std::vector<double>& log_probs, int target) {
    const double t = log_probs.at(static_cast<std::size_t>(target));
    int rank = 0;
    for (int j = 0; j < static_cast<int>(log_probs.size()); ++j) {
        if (log_probs[j] > t || (log_probs[j] == t && j < target)) ++rank;
    }
    return rank;
}

double top_k_accuracy(std::span<const PredictionRecord> records, int k) {
    if (records.empty()) throw RangeError("top-k accuracy is undefined for an empty record set");
    const int num_classes = static_cast<int>(records.front().log_probs.size());
    if (k < 1 || k > num_classes) {
        throw RangeError("k=" + std::to_string(k) + " outside [1, " + std::to_string(num_classes) + "]");
    }
    std::size_t hits = 0;
    for (const auto& r : records) {
        if (rank_of(r.log_probs, r.target) < k) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

namespace {

void per_class(std::span<const PredictionRecord> records, int num_classes, std::vector<int>& correct,
               std::vector<int>& total) {
    correct.assign(num_classes, 0);
    total.assign(num_classes, 0);
    for (const auto& r : records) {
        if (r.target < 0 || r.target >= num_classes) throw RangeError("record target outside [0, K)");
        ++total[r.target];
        if (rank_of(r.log_probs, r.target) == 0) ++correct[r.target];
    }
}

}  // namespace

double mean_class_accuracy(std::span<const PredictionRecord> records, int num_classes, int* covered) {
    if (records.empty()) throw RangeError("MCA is undefined for an empty record set");
    std::vector<int> correct, total;
    per_class(records, num_classes, correct, total);
    double sum = 0;
    int n = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (total[c] == 0) continue;
        sum += 100.0 * correct[c] / total[c];
        ++n;
    }
    if (n < num_classes) {
        std::cerr << "warning: MCA excludes " << (num_classes - n) << " class(es) without samples; " << n << " of "
                  << num_classes << " covered\n";
    }
    if (covered != nullptr) *covered = n;
    return sum / n;
}

MetricsReport compute_metrics(std::span<const PredictionRecord> records, int num_classes, Protocol protocol) {
    MetricsReport m;
    m.protocol = protocol;
    m.n_samples = static_cast<int>(records.size());
    m.top1 = top_k_accuracy(records, 1);
    m.top2 = top_k_accuracy(records, std::min(2, num_classes));
    m.top5 = top_k_accuracy(records, std::min(5, num_classes));
    m.mca = mean_class_accuracy(records, num_classes, &m.covered_classes);
    std::vector<int> correct, total;
    per_class(records, num_classes, correct, total);
    m.per_class_count = total;
    for (int c = 0; c < num_classes; ++c) {
        m.per_class_top1.push_back(total[c] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                 : 100.0 * correct[c] / total[c]);
    }
    return m;
}

nlohmann::json to_json(const MetricsReport& m) {
    return {{"top1", m.top1},
            {"top2", m.top2},
            {"top5", m.top5},
            {"mca", m.mca},
            {"per_class_top1", m.per_class_top1},
            {"per_class_count", m.per_class_count},
            {"covered_classes", m.covered_classes},
            {"n_samples", m.n_samples},
            {"protocol", to_string(m.protocol)}};
}

std::vector<double> average_crop_probabilities(const std::vector<std::vector<double>>& crop_log_probs) {
    if (crop_log_probs.empty()) throw RangeError("no crops to average");
    const std::size_t k = crop_log_probs.front().size();
    std::vector<double> mean(k, 0.0);
    for (const auto& lp : crop_log_probs) {
        if (lp.size() != k) throw ShapeError("crop predictions disagree on K");
        for (std::size_t j = 0; j < k; ++j) mean[j] += std::exp(lp[j]);
    }
    double total = 0;
    for (double& v : mean) {
        v /= static_cast<double>(crop_log_probs.size());
        total += v;
    }
    for (double& v : mean) v = std::log(v / total);
    return mean;
}

Tensor predict_batch(SceneModel& model, std::span<const data::Sample> samples, Pathway pathway) {
    std::vector<data::RgbImage> images;
    std::vector<data::SemanticScoreTensor> sems;
    for (const auto& s : samples) {
        if (pathway != Pathway::Semantic) images.push_back(s.image);
        if (pathway != Pathway::Rgb) sems.push_back(s.semantics);
    }
    switch (pathway) {
        case Pathway::Rgb: return model.forward_rgb_only(data::images_to_tensor(images), nn::Mode::Eval);
        case Pathway::Semantic: return model.forward_semantic_only(data::semantics_to_tensor(sems), nn::Mode::Eval);
        case Pathway::Fused: break;
    }
    return model.forward(data::images_to_tensor(images), data::semantics_to_tensor(sems), nn::Mode::Eval);
}

namespace {

std::vector<double> row(const Tensor& log_probs, int n) {
    const int k = log_probs.dim(1);
    return {log_probs.data() + static_cast<std::size_t>(n) * k, log_probs.data() + static_cast<std::size_t>(n + 1) * k};
}

}  // namespace

PredictionRecord ten_crop_predict(SceneModel& model, const data::Sample& sample, Pathway pathway) {
    const auto images = data::ten_crop(sample.image);
    const auto sems = data::ten_crop(sample.semantics);
    std::vector<data::Sample> crops(images.size());
    for (std::size_t i = 0; i < crops.size(); ++i) {
        crops[i].image = images[i];
        crops[i].semantics = sems[i];
    }
    const Tensor lp = predict_batch(model, crops, pathway);
    std::vector<std::vector<double>> per_crop;
    for (int i = 0; i < lp.dim(0); ++i) per_crop.push_back(row(lp, i));
    return {sample.id, average_crop_probabilities(per_crop), sample.scene_label};
}

std::vector<PredictionRecord> predict(SceneModel& model, const std::vector<data::Sample>& samples, Pathway pathway,
                                      Protocol protocol, int batch_size) {
    std::vector<PredictionRecord> out;
    out.reserve(samples.size());
    if (protocol == Protocol::TenCrop) {
        for (const auto& s : samples) out.push_back(ten_crop_predict(model, s, pathway));
        return out;
    }
    batch_size = std::max(1, batch_size);
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t end = std::min(samples.size(), start + batch_size);
        std::vector<data::Sample> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(data::center_crop(samples[i]));
        const Tensor lp = predict_batch(model, batch, pathway);
        for (std::size_t i = start; i < end; ++i) {
            out.push_back({samples[i].id, row(lp, static_cast<int>(i - start)), samples[i].scene_label});
        }
    }
    return out;
}

void write_metrics(const std::filesystem::path& path, const MetricsReport& report,
                   const std::vector<std::string>& class_names) {
    nlohmann::json j = to_json(report);
    j["class_names"] = class_names;
    util::write_file_atomic(path, j.dump(2) + "\n");
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
    std::string text;
    for (const auto& r : records) {
        std::vector<int> order(r.log_probs.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r.log_probs[a] > r.log_probs[b]; });
        order.resize(std::min<std::size_t>(5, order.size()));
        std::vector<double> lps;
        for (int c : order) lps.push_back(r.log_probs[c]);
        text += nlohmann::json{{"id", r.sample_id}, {"target", r.target}, {"top5", order}, {"top5_log_probs", lps}}.dump();
        text += "\n";
    }
    util::write_file_atomic(path, text);
}

}  // namespace semattn::eval
