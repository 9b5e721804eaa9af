#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lungbench/dataset.h"
#include "lungbench/metrics.h"
#include "lungbench/models.h"
#include "lungbench/report.h"
#include "lungbench/train.h"

namespace lungbench {

// Method identifiers in report order.
inline constexpr std::array<std::string_view, 5> kMethodIds = {
    "cnn_basic", "cnn_aug", "resnet_style", "vit", "proposed"};

std::string_view MethodDisplayName(std::string_view id);
// Throws ArgumentError listing the valid ids.
void RequireMethodId(std::string_view id);

struct MethodConfig {
  std::string id;
  ModelSpec spec;
  TrainConfig train;
  // Ensemble only: one config per member, in spec.members order.
  std::vector<TrainConfig> member_train;
};

// Command-line overrides applied to every method.
struct TrainOverrides {
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<double> momentum;
  std::optional<int> batch_size;
};

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::uint64_t global_seed = 7;
  std::vector<MethodConfig> methods;  // kMethodIds order

  // Desk-scale defaults. Each method's init and training seeds are derived
  // from global_seed and the method id; the ensemble's members reuse the
  // resnet_style and vit settings.
  static ExperimentConfig Default(std::filesystem::path manifest,
                                  std::filesystem::path out_dir,
                                  std::uint64_t global_seed, int input_side,
                                  const TrainOverrides& overrides = {});

  const MethodConfig& method(std::string_view id) const;
  void Validate() const;
};

// Paths are left out so that the same settings hash identically wherever
// they run.
nlohmann::json ExperimentConfigToJson(const ExperimentConfig& config);
std::string ConfigHash(const ExperimentConfig& config);

struct ExperimentData {
  DatasetManifest manifest;
  std::vector<ImageSample> train;
  std::vector<ImageSample> validation;
  std::vector<ImageSample> test;
  int input_side = 0;

  const std::vector<ImageSample>& split(Split s) const;
};

// Loads every split and checks that all images share one square size.
ExperimentData LoadExperimentData(const std::filesystem::path& manifest);

struct TrainedMethod {
  std::string id;
  Model model;
  nlohmann::json train_report;
};

TrainedMethod TrainMethod(const ExperimentConfig& config, std::string_view id,
                          const ExperimentData& data,
                          std::ostream* log = nullptr);

// Writes <id>.model.json plus one weight file per trained network:
// <id>.lbm, or <id>.resnet.lbm and <id>.vit.lbm for the ensemble. Returns
// every path written.
std::vector<std::filesystem::path> SaveMethodModel(
    const std::filesystem::path& out_dir, std::string_view id,
    const Model& model);
Model LoadModelManifest(const std::filesystem::path& model_json);
Model LoadMethodModel(const std::filesystem::path& out_dir, std::string_view id);

std::filesystem::path ModelManifestPath(const std::filesystem::path& out_dir,
                                        std::string_view id);

// Scores that put all mass on the true class.
Predictions OraclePredictions(std::span<const ImageSample> samples);

// <id>.<split>.predictions.csv, .metrics.json and .metrics.txt.
void WriteEvaluation(const std::filesystem::path& out_dir, std::string_view id,
                     Split split, const Predictions& predictions,
                     const MetricsReport& report);

// Parses LUNGBENCH_THREADS; 1 when unset.
int ThreadsFromEnv();

// Trains and evaluates every method on the test split, saving each method's
// artifacts as soon as it finishes, and writes compare.json / compare.txt.
// Methods may train concurrently on up to `threads` workers; each is
// independent of scheduling, so results do not depend on the thread count.
ComparisonReport RunCompare(const ExperimentConfig& config,
                            const ExperimentData& data, int threads,
                            std::ostream* log = nullptr);

}  // namespace lungbench
