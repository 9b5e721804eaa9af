#include "lungbench/report.h"

#include <algorithm>
#include <ctime>
#include <cstdio>

namespace lungbench {
namespace {

constexpr std::array<const char*, 4> kMetricHeaders = {
    "Accuracy", "Sensitivity", "Specificity", "AUC"};

void Append(std::string& out, const std::string& cell, std::size_t width,
            bool last) {
  out += cell;
  if (!last && cell.size() < width) out.append(width - cell.size(), ' ');
  if (!last) out += "  ";
}

std::string Fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

ComparisonReport BuildComparisonReport(std::span<const MethodMetrics> methods,
                                       Provenance provenance) {
  ComparisonReport report;
  report.provenance = std::move(provenance);
  for (const MethodMetrics& m : methods) {
    const MetricsReport& r = m.report;
    for (std::size_t k = 0; k < r.per_class.size(); ++k) {
      const ClassMetrics& c = r.per_class[k];
      report.rows.push_back({m.method_id, m.method, r.class_names[k],
                             c.accuracy, c.sensitivity, c.specificity, c.auc});
    }
    report.rows.push_back({m.method_id, m.method, std::string(kMeanRowName),
                           r.mean.accuracy, r.mean.sensitivity,
                           r.mean.specificity, r.mean.auc});
  }
  return report;
}

std::string FormatRow(const ComparisonRow& row, const RowLayout& layout) {
  std::string out;
  Append(out, row.method, layout.method, false);
  Append(out, row.disease, layout.disease, false);
  const std::array<double, 4> values = {row.accuracy, row.sensitivity,
                                        row.specificity, row.auc};
  for (std::size_t i = 0; i < values.size(); ++i) {
    Append(out, Fixed2(values[i]), layout.metrics[i], i + 1 == values.size());
  }
  return out;
}

std::string ComparisonReportToText(const ComparisonReport& report) {
  RowLayout layout;
  layout.method = 6;   // "Method"
  layout.disease = 7;  // "Disease"
  for (std::size_t i = 0; i < kMetricHeaders.size(); ++i) {
    layout.metrics[i] = std::string(kMetricHeaders[i]).size();
  }
  for (const ComparisonRow& row : report.rows) {
    layout.method = std::max(layout.method, row.method.size());
    layout.disease = std::max(layout.disease, row.disease.size());
  }
  std::string out;
  Append(out, "Method", layout.method, false);
  Append(out, "Disease", layout.disease, false);
  for (std::size_t i = 0; i < kMetricHeaders.size(); ++i) {
    Append(out, kMetricHeaders[i], layout.metrics[i],
           i + 1 == kMetricHeaders.size());
  }
  out += '\n';
  for (const ComparisonRow& row : report.rows) {
    out += FormatRow(row, layout);
    out += '\n';
  }
  return out;
}

nlohmann::json ComparisonReportToJson(const ComparisonReport& report,
                                      bool include_timestamps) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ComparisonRow& r : report.rows) {
    rows.push_back({{"method_id", r.method_id},
                    {"method", r.method},
                    {"disease", r.disease},
                    {"accuracy", r.accuracy},
                    {"sensitivity", r.sensitivity},
                    {"specificity", r.specificity},
                    {"auc", r.auc}});
  }
  const Provenance& p = report.provenance;
  nlohmann::json provenance = {{"seed", p.seed},
                               {"config_hash", p.config_hash},
                               {"manifest", p.manifest},
                               {"threads", p.threads}};
  if (include_timestamps) {
    provenance["started_at"] = p.started_at;
    provenance["finished_at"] = p.finished_at;
  }
  return {{"columns", {"method", "disease", "accuracy", "sensitivity",
                       "specificity", "auc"}},
          {"rows", rows},
          {"provenance", provenance}};
}

std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace lungbench
