#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lungbench/metrics.h"

namespace lungbench {

inline constexpr std::string_view kMeanRowName = "Media";

struct ComparisonRow {
  std::string method_id;  // e.g. "cnn_basic"
  std::string method;     // display name, e.g. "CNN basic"
  std::string disease;    // class name or kMeanRowName
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string manifest;
  std::string started_at;   // UTC, ISO 8601
  std::string finished_at;  // UTC, ISO 8601
  int threads = 1;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  Provenance provenance;
};

struct MethodMetrics {
  std::string method_id;
  std::string method;
  MetricsReport report;
};

// One row per class in report order, then the mean row, per method.
ComparisonReport BuildComparisonReport(std::span<const MethodMetrics> methods,
                                       Provenance provenance);

// Column widths for FormatRow; zero means "as wide as the text". Columns are
// separated by two spaces and metrics use two decimals.
struct RowLayout {
  std::size_t method = 0;
  std::size_t disease = 0;
  std::array<std::size_t, 4> metrics{};
};

std::string FormatRow(const ComparisonRow& row, const RowLayout& layout = {});

// Header plus every row, aligned. Contains no timestamps.
std::string ComparisonReportToText(const ComparisonReport& report);

nlohmann::json ComparisonReportToJson(const ComparisonReport& report,
                                      bool include_timestamps = true);

// UTC wall-clock time as "YYYY-MM-DDTHH:MM:SSZ".
std::string UtcTimestamp();

}  // namespace lungbench
