// lungbench: generate data, train, evaluate and compare the five methods.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lungbench/error.h"
#include "lungbench/experiment.h"
#include "lungbench/metrics.h"
#include "lungbench/synthetic.h"

namespace fs = std::filesystem;
using namespace lungbench;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct Options {
  std::string manifest;
  std::string method;
  std::string split = "test";
  std::uint64_t seed = 7;
  std::string out;
  std::string per_class = "50,10,15";
  int side = 0;
  bool paper_scale = false;
  TrainOverrides overrides;
  std::string model;
  bool oracle = false;
  std::string csv;
};

SplitCounts ParsePerClass(const std::string& text) {
  SplitCounts c;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d,%d,%d%c", &c.train, &c.validation, &c.test,
                  &tail) != 3 ||
      c.train < 0 || c.validation < 0 || c.test < 0) {
    throw ArgumentError("--per-class expects TRAIN,VALIDATION,TEST counts, got '" +
                        text + "'");
  }
  return c;
}

int Generate(const Options& o) {
  const SplitCounts counts =
      o.paper_scale ? kPaperScaleCounts : ParsePerClass(o.per_class);
  const int side = o.side > 0 ? o.side : (o.paper_scale ? 256 : 32);
  const auto request = SyntheticRequest::Uniform(counts, side, o.seed);
  const DatasetManifest manifest = GenerateSynthetic(request, o.out);
  std::printf("%-14s %8s %11s %8s\n", "Class", "train", "validation", "test");
  for (ClassLabel label : kAllLabels) {
    std::printf("%-14s %8zu %11zu %8zu\n", std::string(LabelName(label)).c_str(),
                manifest.Count(label, Split::kTrain),
                manifest.Count(label, Split::kValidation),
                manifest.Count(label, Split::kTest));
  }
  std::printf("%-14s %8zu %11zu %8zu\n", "Total", manifest.Count(Split::kTrain),
              manifest.Count(Split::kValidation), manifest.Count(Split::kTest));
  std::printf("wrote %zu images (%dx%d) and %s\n", manifest.entries.size(), side,
              side, (fs::path(o.out) / "manifest.csv").string().c_str());
  return 0;
}

int Train(const Options& o) {
  RequireMethodId(o.method);
  const ExperimentData data = LoadExperimentData(o.manifest);
  const ExperimentConfig config = ExperimentConfig::Default(
      o.manifest, o.out, o.seed, data.input_side, o.overrides);
  TrainedMethod trained = TrainMethod(config, o.method, data, &std::cerr);
  for (const fs::path& p : SaveMethodModel(o.out, o.method, trained.model)) {
    std::printf("wrote %s\n", p.string().c_str());
  }
  const fs::path report = fs::path(o.out) / (o.method + ".train.json");
  std::ofstream(report) << trained.train_report.dump(2) << "\n";
  std::printf("wrote %s\n", report.string().c_str());
  return 0;
}

int Evaluate(const Options& o) {
  RequireMethodId(o.method);
  const Split split = ParseSplit(o.split);
  const DatasetManifest manifest = LoadManifest(o.manifest);
  const std::vector<ImageSample> samples = SplitView(manifest, split);
  Predictions predictions;
  if (o.oracle) {
    predictions = OraclePredictions(samples);
  } else {
    const Model model = o.model.empty() ? LoadMethodModel(o.out, o.method)
                                        : LoadModelManifest(o.model);
    predictions = Predict(model, samples, DefaultClassNames());
  }
  const MetricsReport report = ComputeReport(predictions);
  WriteEvaluation(o.out, o.method, split, predictions, report);
  std::cout << MetricsReportToText(report);
  return 0;
}

int Compare(const Options& o) {
  const int threads = ThreadsFromEnv();
  const ExperimentData data = LoadExperimentData(o.manifest);
  const ExperimentConfig config = ExperimentConfig::Default(
      o.manifest, o.out, o.seed, data.input_side, o.overrides);
  const ComparisonReport report = RunCompare(config, data, threads, &std::cerr);
  std::cout << ComparisonReportToText(report);
  return 0;
}

int MetricsFromCsv(const Options& o) {
  const MetricsReport report = ComputeReport(ReadPredictionsCsv(o.csv));
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    const fs::path path =
        fs::path(o.out) / (fs::path(o.csv).stem().string() + ".metrics.json");
    std::ofstream(path) << MetricsReportToJson(report).dump(2) << "\n";
  }
  std::cout << MetricsReportToText(report);
  return 0;
}

void AddOverrides(CLI::App* cmd, Options& o) {
  cmd->add_option("--epochs", o.overrides.epochs, "Epochs for every method");
  cmd->add_option("--lr", o.overrides.learning_rate, "Learning rate");
  cmd->add_option("--momentum", o.overrides.momentum, "SGD momentum");
  cmd->add_option("--batch-size", o.overrides.batch_size, "Mini-batch size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lung pathology classifier benchmark"};
  app.require_subcommand(1);
  Options o;

  std::string method_help = "Method id (";
  for (std::string_view id : kMethodIds) {
    method_help += std::string(id) + (id == kMethodIds.back() ? ")" : ", ");
  }

  CLI::App* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--per-class", o.per_class,
                  "Images per class as TRAIN,VALIDATION,TEST")
      ->capture_default_str();
  gen->add_option("--side", o.side, "Image side in pixels (default 32, or 256 "
                                    "with --paper-scale)");
  gen->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  gen->add_flag("--paper-scale", o.paper_scale,
                "2000/400/600 images per class");

  CLI::App* train = app.add_subcommand("train", "Train one method");
  train->add_option("--manifest", o.manifest, "Dataset manifest")->required();
  train->add_option("--method", o.method, method_help)->required();
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--seed", o.seed, "Global seed")->capture_default_str();
  AddOverrides(train, o);

  CLI::App* eval = app.add_subcommand("evaluate", "Evaluate a trained method");
  eval->add_option("--manifest", o.manifest, "Dataset manifest")->required();
  eval->add_option("--method", o.method, method_help)->required();
  eval->add_option("--out", o.out,
                   "Directory holding the model; reports are written here")
      ->required();
  eval->add_option("--split", o.split, "train, validation or test")
      ->capture_default_str();
  eval->add_option("--model", o.model,
                   "Model manifest (default <out>/<method>.model.json)");
  eval->add_flag("--oracle", o.oracle,
                 "Score with a perfect oracle instead of a model (test hook)");

  CLI::App* cmp = app.add_subcommand("compare", "Train and evaluate all methods");
  cmp->add_option("--manifest", o.manifest, "Dataset manifest")->required();
  cmp->add_option("--out", o.out, "Output directory")->required();
  cmp->add_option("--seed", o.seed, "Global seed")->capture_default_str();
  AddOverrides(cmp, o);

  CLI::App* mfc = app.add_subcommand("metrics-from-csv",
                                     "Metrics report from a predictions CSV");
  mfc->add_option("csv", o.csv, "Predictions CSV")->required();
  mfc->add_option("--out", o.out, "Also write <csv stem>.metrics.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return Generate(o);
    if (*train) return Train(o);
    if (*eval) return Evaluate(o);
    if (*cmp) return Compare(o);
    if (*mfc) return MetricsFromCsv(o);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ImageError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ModelFileError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
