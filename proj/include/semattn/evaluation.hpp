#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semattn/data/types.hpp"
#include "semattn/model.hpp"

namespace semattn::eval {

struct PredictionRecord {
    std::string sample_id;
    std::vector<double> log_probs;
    int target = 0;
};

enum class Protocol { Single, TenCrop };
enum class Pathway { Fused, Rgb, Semantic };

std::string to_string(Protocol p);
std::string to_string(Pathway p);
Protocol parse_protocol(const std::string& s);
Pathway parse_pathway(const std::string& s);

struct MetricsReport {
    double top1 = 0;
    double top2 = 0;
    double top5 = 0;
    double mca = 0;
    // NaN for classes without samples.
    std::vector<double> per_class_top1;
    std::vector<int> per_class_count;
    int covered_classes = 0;
    int n_samples = 0;
    Protocol protocol = Protocol::Single;
};

// Position of `target` when classes are ranked by log-probability, highest
// first; equal values rank the lower class index first.
int rank_of(const std::vector<double>& log_probs, int target);

// Percentage of records whose target ranks within the top k. Throws
// RangeError on empty records or k outside [1, K].
double top_k_accuracy(std::span<const PredictionRecord> records, int k);

// Unweighted mean of per-class Top@1 over classes present in `records`.
// Absent classes are skipped with a warning on stderr; `covered` receives the
// number of classes that contributed.
double mean_class_accuracy(std::span<const PredictionRecord> records, int num_classes, int* covered = nullptr);

// Top@k for k > K is reported as 100.
MetricsReport compute_metrics(std::span<const PredictionRecord> records, int num_classes, Protocol protocol);

nlohmann::json to_json(const MetricsReport& report);

// Mean of crop probabilities, returned as log-probabilities.
std::vector<double> average_crop_probabilities(const std::vector<std::vector<double>>& crop_log_probs);

// Eval-mode log-probabilities for a batch of prepared 224x224 samples.
Tensor predict_batch(SceneModel& model, std::span<const data::Sample> samples, Pathway pathway);

// All ten crops of one sample through the model, probabilities averaged.
PredictionRecord ten_crop_predict(SceneModel& model, const data::Sample& sample, Pathway pathway);

std::vector<PredictionRecord> predict(SceneModel& model, const std::vector<data::Sample>& samples, Pathway pathway,
                                      Protocol protocol, int batch_size = 16);

void write_metrics(const std::filesystem::path& path, const MetricsReport& report,
                   const std::vector<std::string>& class_names);
// One JSON line per record: {id, target, top5 labels, top5 log-probs}.
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);

}  // namespace semattn::eval
