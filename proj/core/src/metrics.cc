#include "lungbench/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lungbench/error.h"
#include "lungbench/graph.h"

namespace lungbench {
namespace {

double Ratio(double num, double den, bool* degenerate) {
  if (den == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  return num / den;
}

double D(std::uint64_t v) { return static_cast<double>(v); }

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
      field.pop_back();
    }
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json ClassMetricsToJson(const ClassMetrics& m, bool with_roc) {
  nlohmann::json j = {{"accuracy", m.accuracy}, {"sensitivity", m.sensitivity},
                      {"specificity", m.specificity}, {"auc", m.auc},
                      {"f1", m.f1}, {"mcc", m.mcc}, {"dice", m.dice},
                      {"degenerate", m.degenerate}};
  if (with_roc) {
    nlohmann::json roc = nlohmann::json::array();
    for (const RocPoint& p : m.roc) roc.push_back({p.fpr, p.tpr});
    j["roc"] = roc;
  }
  return j;
}

}  // namespace

ConfusionCounts CountConfusion(std::span<const int> predicted,
                               std::span<const int> truth, int positive_class) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("confusion_counts: " + std::to_string(predicted.size()) +
                     " predictions for " + std::to_string(truth.size()) +
                     " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual = truth[i] == positive_class;
    const bool said = predicted[i] == positive_class;
    if (actual && said) {
      ++c.tp;
    } else if (!actual && said) {
      ++c.fp;
    } else if (!actual && !said) {
      ++c.tn;
    } else {
      ++c.fn;
    }
  }
  return c;
}

double Accuracy(const ConfusionCounts& c, bool* degenerate) {
  return Ratio(D(c.tp + c.tn), D(c.total()), degenerate);
}

double Sensitivity(const ConfusionCounts& c, bool* degenerate) {
  return Ratio(D(c.tp), D(c.tp + c.fn), degenerate);
}

double Specificity(const ConfusionCounts& c, bool* degenerate) {
  return Ratio(D(c.tn), D(c.tn + c.fp), degenerate);
}

double F1(const ConfusionCounts& c, bool* degenerate) {
  return Ratio(2.0 * D(c.tp), D(2 * c.tp + c.fp + c.fn), degenerate);
}

double Dice(const ConfusionCounts& c, bool* degenerate) {
  return Ratio(2.0 * D(c.tp), D(2 * c.tp + c.fp + c.fn), degenerate);
}

double Mcc(const ConfusionCounts& c, bool* degenerate) {
  const double a = D(c.tp + c.fp), b = D(c.tp + c.fn), d = D(c.tn + c.fp),
               e = D(c.tn + c.fn);
  if (a == 0.0 || b == 0.0 || d == 0.0 || e == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  const double num = D(c.tp) * D(c.tn) - D(c.fp) * D(c.fn);
  return std::clamp(num / std::sqrt(a * b * d * e), -1.0, 1.0);
}

RocCurve ComputeRocCurve(std::span<const double> scores,
                         std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("roc_curve: " + std::to_string(scores.size()) +
                     " scores for " + std::to_string(labels.size()) +
                     " labels");
  }
  std::uint64_t positives = 0, negatives = 0;
  for (int y : labels) (y != 0 ? positives : negatives) += 1;
  if (positives == 0) {
    throw ArgumentError("roc_curve: no positive samples");
  }
  if (negatives == 0) {
    throw ArgumentError("roc_curve: no negative samples");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] != 0 ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({D(fp) / D(negatives), D(tp) / D(positives)});
  }
  return curve;
}

double Auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

ConfusionMatrix ComputeConfusionMatrix(std::span<const int> predicted,
                                       std::span<const int> truth,
                                       std::size_t num_classes) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("confusion_matrix: length mismatch");
  }
  ConfusionMatrix m(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (t >= num_classes || p >= num_classes) {
      throw ArgumentError("confusion_matrix: class index out of range");
    }
    ++m[t][p];
  }
  return m;
}

std::vector<int> Predictions::Argmax() const {
  std::vector<int> out;
  out.reserve(scores.size());
  for (const auto& row : scores) {
    out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) -
                                   row.begin()));
  }
  return out;
}

MetricsReport ComputeReport(const Predictions& predictions) {
  if (predictions.size() == 0) {
    throw DataError(DataErrorKind::kEmpty, "cannot evaluate an empty sample set");
  }
  const std::size_t c = predictions.class_names.size();
  const std::vector<int> predicted = predictions.Argmax();
  MetricsReport report;
  report.class_names = predictions.class_names;
  report.num_samples = predictions.size();
  report.confusion = ComputeConfusionMatrix(predicted, predictions.truth, c);
  for (std::size_t k = 0; k < c; ++k) {
    const int cls = static_cast<int>(k);
    const ConfusionCounts counts =
        CountConfusion(predicted, predictions.truth, cls);
    ClassMetrics m;
    bool deg = false;
    m.accuracy = Accuracy(counts, &deg);
    if (deg) m.degenerate.push_back("accuracy");
    m.sensitivity = Sensitivity(counts, &deg);
    if (deg) m.degenerate.push_back("sensitivity");
    m.specificity = Specificity(counts, &deg);
    if (deg) m.degenerate.push_back("specificity");
    m.f1 = F1(counts, &deg);
    if (deg) m.degenerate.push_back("f1");
    m.mcc = Mcc(counts, &deg);
    if (deg) m.degenerate.push_back("mcc");
    m.dice = Dice(counts, &deg);
    if (deg) m.degenerate.push_back("dice");

    std::vector<double> column;
    std::vector<int> binary;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      column.push_back(predictions.scores[i][k]);
      binary.push_back(predictions.truth[i] == cls ? 1 : 0);
    }
    if (counts.tp + counts.fn == 0 || counts.tn + counts.fp == 0) {
      m.auc = 0.0;
      m.degenerate.push_back("auc");
    } else {
      RocCurve curve = ComputeRocCurve(column, binary);
      m.auc = Auc(curve);
      m.roc = std::move(curve.points);
    }
    report.per_class.push_back(std::move(m));
  }
  const double n = static_cast<double>(c);
  for (const ClassMetrics& m : report.per_class) {
    report.mean.accuracy += m.accuracy;
    report.mean.sensitivity += m.sensitivity;
    report.mean.specificity += m.specificity;
    report.mean.auc += m.auc;
    report.mean.f1 += m.f1;
    report.mean.mcc += m.mcc;
    report.mean.dice += m.dice;
  }
  report.mean.accuracy /= n;
  report.mean.sensitivity /= n;
  report.mean.specificity /= n;
  report.mean.auc /= n;
  report.mean.f1 /= n;
  report.mean.mcc /= n;
  report.mean.dice /= n;
  return report;
}

std::vector<std::string> DefaultClassNames() {
  std::vector<std::string> names;
  for (ClassLabel l : kAllLabels) names.emplace_back(LabelName(l));
  return names;
}

Predictions Predict(const Model& model, std::span<const ImageSample> samples,
                    std::span<const std::string> class_names) {
  if (samples.empty()) {
    throw DataError(DataErrorKind::kEmpty, "cannot evaluate an empty sample set");
  }
  if (class_names.size() != static_cast<std::size_t>(model.spec().num_classes)) {
    throw ArgumentError("model has " + std::to_string(model.spec().num_classes) +
                        " classes but " + std::to_string(class_names.size()) +
                        " class names were given");
  }
  Predictions p;
  p.class_names.assign(class_names.begin(), class_names.end());
  const std::size_t c = class_names.size();
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    auto chunk = samples.subspan(start, std::min(kChunk, samples.size() - start));
    Graph graph(GradMode::kDisabled);
    Tensor probs = graph.Softmax(model.Forward(graph, StackPixels(chunk)));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      p.ids.push_back(chunk[i].id);
      p.truth.push_back(LabelIndex(chunk[i].label));
      auto row = probs.values().subspan(i * c, c);
      p.scores.emplace_back(row.begin(), row.end());
    }
  }
  return p;
}

MetricsReport EvaluateModel(const Model& model,
                            std::span<const ImageSample> samples,
                            std::span<const std::string> class_names) {
  return ComputeReport(Predict(model, samples, class_names));
}

void WritePredictionsCsv(const Predictions& predictions,
                         const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  }
  f << "id,true_label";
  for (const std::string& name : predictions.class_names) f << ",score_" << name;
  f << '\n';
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    f << predictions.ids[i] << ','
      << predictions.class_names[static_cast<std::size_t>(predictions.truth[i])];
    for (double s : predictions.scores[i]) f << ',' << FormatDouble(s);
    f << '\n';
  }
  if (!f) throw DataError(DataErrorKind::kIo, "failed writing " + path.string());
}

Predictions ReadPredictionsCsv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw DataError(DataErrorKind::kIo, "cannot open predictions " + path.string());
  }
  std::string line;
  if (!std::getline(f, line)) {
    throw DataError(DataErrorKind::kMalformed, path.string() + ":1: missing header");
  }
  const auto header = SplitLine(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "true_label") {
    throw DataError(DataErrorKind::kMalformed,
                    path.string() +
                        ":1: expected header 'id,true_label,score_<class>,...'");
  }
  Predictions p;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i].rfind("score_", 0) != 0) {
      throw DataError(DataErrorKind::kMalformed,
                      path.string() + ":1: column '" + header[i] +
                          "' is not a score_<class> column");
    }
    p.class_names.push_back(header[i].substr(6));
  }
  const std::size_t c = p.class_names.size();
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = SplitLine(line);
    if (fields.size() != c + 2) {
      throw DataError(DataErrorKind::kMalformed,
                      where + ": expected " + std::to_string(c + 2) +
                          " fields, got " + std::to_string(fields.size()));
    }
    auto it = std::find(p.class_names.begin(), p.class_names.end(), fields[1]);
    if (it == p.class_names.end()) {
      throw DataError(DataErrorKind::kUnknownLabel,
                      where + ": unknown true_label '" + fields[1] + "'");
    }
    std::vector<double> row;
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const std::string& text = fields[k + 2];
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
        throw DataError(DataErrorKind::kMalformed,
                        where + ": bad score '" + text + "'");
      }
      row.push_back(v);
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw DataError(DataErrorKind::kMalformed,
                      where + ": scores for '" + fields[0] + "' sum to " +
                          FormatDouble(sum) + ", expected 1 within 1e-6");
    }
    p.ids.push_back(fields[0]);
    p.truth.push_back(static_cast<int>(it - p.class_names.begin()));
    p.scores.push_back(std::move(row));
  }
  return p;
}

nlohmann::json MetricsReportToJson(const MetricsReport& report) {
  nlohmann::json j;
  j["classes"] = report.class_names;
  j["num_samples"] = report.num_samples;
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    per_class[report.class_names[k]] =
        ClassMetricsToJson(report.per_class[k], true);
  }
  j["per_class"] = per_class;
  j["mean"] = ClassMetricsToJson(report.mean, false);
  j["confusion_matrix"] = report.confusion;
  return j;
}

std::string MetricsReportToText(const MetricsReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %9s %12s %12s %7s %7s %7s %7s\n",
                "Class", "Accuracy", "Sensitivity", "Specificity", "AUC", "F1",
                "MCC", "Dice");
  out += buf;
  auto row = [&](const std::string& name, const ClassMetrics& m) {
    std::snprintf(buf, sizeof(buf),
                  "%-14s %9.4f %12.4f %12.4f %7.4f %7.4f %7.4f %7.4f\n",
                  name.c_str(), m.accuracy, m.sensitivity, m.specificity, m.auc,
                  m.f1, m.mcc, m.dice);
    out += buf;
  };
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    row(report.class_names[k], report.per_class[k]);
  }
  row("Mean", report.mean);
  out += "\nConfusion matrix (rows: true, columns: predicted)\n";
  std::snprintf(buf, sizeof(buf), "%-14s", "");
  out += buf;
  for (const std::string& name : report.class_names) {
    std::snprintf(buf, sizeof(buf), " %12s", name.c_str());
    out += buf;
  }
  out += '\n';
  for (std::size_t t = 0; t < report.confusion.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%-14s", report.class_names[t].c_str());
    out += buf;
    for (std::uint64_t v : report.confusion[t]) {
      std::snprintf(buf, sizeof(buf), " %12llu",
                    static_cast<unsigned long long>(v));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace lungbench
