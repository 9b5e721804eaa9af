#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lungbench/dataset.h"
#include "lungbench/models.h"

namespace lungbench {

// One-vs-rest counts with one class treated as "disease present".
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts CountConfusion(std::span<const int> predicted,
                               std::span<const int> truth, int positive_class);

// Formula metrics on counts. A zero denominator yields 0 and sets
// *degenerate (when given) to true; nothing throws.
double Accuracy(const ConfusionCounts& c, bool* degenerate = nullptr);
double Sensitivity(const ConfusionCounts& c, bool* degenerate = nullptr);
double Specificity(const ConfusionCounts& c, bool* degenerate = nullptr);
double F1(const ConfusionCounts& c, bool* degenerate = nullptr);
double Dice(const ConfusionCounts& c, bool* degenerate = nullptr);
// (tp tn - fp fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn)); 0 when any factor
// is 0.
double Mcc(const ConfusionCounts& c, bool* degenerate = nullptr);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
};

// Sweeps thresholds over the distinct scores in descending order; tied
// scores enter together. Starts at (0, 0) and ends at (1, 1). labels are
// 1 for positive and 0 for negative. Throws ArgumentError when either class
// is absent.
RocCurve ComputeRocCurve(std::span<const double> scores,
                         std::span<const int> labels);
// Trapezoidal area under the (fpr, tpr) polyline.
double Auc(const RocCurve& curve);

// rows: true class, columns: predicted class.
using ConfusionMatrix = std::vector<std::vector<std::uint64_t>>;
ConfusionMatrix ComputeConfusionMatrix(std::span<const int> predicted,
                                       std::span<const int> truth,
                                       std::size_t num_classes);

struct ClassMetrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  double dice = 0.0;
  // Names of metrics whose denominator was zero.
  std::vector<std::string> degenerate;
  // One-vs-rest ROC points; empty for the mean row and degenerate classes.
  std::vector<RocPoint> roc;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  ClassMetrics mean;  // unweighted mean over classes
  ConfusionMatrix confusion;
  std::size_t num_samples = 0;
};

// Softmax score rows with their ground truth.
struct Predictions {
  std::vector<std::string> class_names;
  std::vector<std::string> ids;
  std::vector<int> truth;
  std::vector<std::vector<double>> scores;

  std::size_t size() const { return ids.size(); }
  // First maximal score per row.
  std::vector<int> Argmax() const;
};

// Per class: one-vs-rest counts from argmax predictions, AUC from that
// class's score column.
MetricsReport ComputeReport(const Predictions& predictions);

Predictions Predict(const Model& model, std::span<const ImageSample> samples,
                    std::span<const std::string> class_names);
MetricsReport EvaluateModel(const Model& model,
                            std::span<const ImageSample> samples,
                            std::span<const std::string> class_names);

std::vector<std::string> DefaultClassNames();

// Header: id,true_label,score_<class>... Scores are written with 17
// significant digits so that reading them back is exact.
void WritePredictionsCsv(const Predictions& predictions,
                         const std::filesystem::path& path);
// Validates each score row sums to 1 within 1e-6. Errors carry the line
// number.
Predictions ReadPredictionsCsv(const std::filesystem::path& path);

nlohmann::json MetricsReportToJson(const MetricsReport& report);
std::string MetricsReportToText(const MetricsReport& report);

}  // namespace lungbench
