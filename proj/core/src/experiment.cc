#include "lungbench/experiment.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "lungbench/error.h"
#include "lungbench/model_io.h"
#include "lungbench/random.h"

namespace lungbench {
namespace {

constexpr int kModelManifestVersion = 1;

std::string JoinIds() {
  std::string out;
  for (std::string_view id : kMethodIds) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  f << text;
  if (!f) throw DataError(DataErrorKind::kIo, "failed writing " + path.string());
}

void WriteJson(const std::filesystem::path& path, const nlohmann::json& j) {
  WriteText(path, j.dump(2) + "\n");
}

std::uint64_t MethodSeed(std::uint64_t global_seed, std::string_view id) {
  return MixSeed(global_seed, Fnv1a64(id));
}

void ApplyOverrides(TrainConfig& c, const TrainOverrides& o) {
  if (o.epochs) c.epochs = *o.epochs;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.momentum) c.momentum = *o.momentum;
  if (o.batch_size) c.batch_size = *o.batch_size;
}

nlohmann::json MethodTrainJson(const MethodConfig& m, const TrainReport& r) {
  nlohmann::json j = TrainReportToJson(r);
  j["method"] = m.id;
  return j;
}

void Log(std::ostream* log, std::mutex& mu, const std::string& line) {
  if (!log) return;
  std::lock_guard<std::mutex> lock(mu);
  *log << line << std::endl;
}

}  // namespace

std::string_view MethodDisplayName(std::string_view id) {
  if (id == "cnn_basic") return "CNN basic";
  if (id == "cnn_aug") return "CNN + Data Augmentation";
  if (id == "resnet_style") return "ResNet-style";
  if (id == "vit") return "ViT";
  if (id == "proposed") return "Proposed method";
  RequireMethodId(id);
  return {};
}

void RequireMethodId(std::string_view id) {
  for (std::string_view known : kMethodIds) {
    if (id == known) return;
  }
  throw ArgumentError("unknown method '" + std::string(id) +
                      "'; valid methods: " + JoinIds());
}

ExperimentConfig ExperimentConfig::Default(std::filesystem::path manifest,
                                           std::filesystem::path out_dir,
                                           std::uint64_t global_seed,
                                           int input_side,
                                           const TrainOverrides& overrides) {
  ExperimentConfig config;
  config.manifest = std::move(manifest);
  config.out_dir = std::move(out_dir);
  config.global_seed = global_seed;

  auto base = [&](std::string_view id, ModelKind kind) {
    MethodConfig m;
    m.id = std::string(id);
    m.spec.kind = kind;
    m.spec.input_side = input_side;
    m.spec.num_classes = static_cast<int>(kNumClasses);
    m.spec.init_seed = MethodSeed(global_seed, id);
    m.train.global_seed = MethodSeed(global_seed, id);
    return m;
  };

  MethodConfig cnn_basic = base("cnn_basic", ModelKind::kBasicCnn);
  cnn_basic.train.epochs = 30;

  MethodConfig cnn_aug = base("cnn_aug", ModelKind::kBasicCnn);
  cnn_aug.train.epochs = 30;
  cnn_aug.train.augment.enabled = true;

  // Global average pooling discards position, so this network needs more
  // width and more epochs than the flattening CNN to separate the classes.
  MethodConfig resnet = base("resnet_style", ModelKind::kResNetStyle);
  resnet.spec.resnet_width = 12;
  resnet.train.epochs = 100;
  resnet.train.learning_rate = 0.005;
  resnet.train.augment.enabled = true;

  MethodConfig vit = base("vit", ModelKind::kViT);
  vit.train.epochs = 100;
  vit.train.augment.enabled = true;

  for (MethodConfig* m : {&cnn_basic, &cnn_aug, &resnet, &vit}) {
    ApplyOverrides(m->train, overrides);
  }

  MethodConfig proposed = base("proposed", ModelKind::kProposedEnsemble);
  proposed.spec.members = {resnet.spec, vit.spec};
  proposed.train = resnet.train;
  proposed.member_train = {resnet.train, vit.train};

  config.methods = {cnn_basic, cnn_aug, resnet, vit, proposed};
  config.Validate();
  return config;
}

const MethodConfig& ExperimentConfig::method(std::string_view id) const {
  RequireMethodId(id);
  for (const MethodConfig& m : methods) {
    if (m.id == id) return m;
  }
  throw ArgumentError("method '" + std::string(id) + "' is not configured");
}

void ExperimentConfig::Validate() const {
  if (methods.size() != kMethodIds.size()) {
    throw ArgumentError("experiment needs exactly the methods " + JoinIds());
  }
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const MethodConfig& m = methods[i];
    if (m.id != kMethodIds[i]) {
      throw ArgumentError("experiment method " + std::to_string(i) + " is '" +
                          m.id + "', expected '" + std::string(kMethodIds[i]) +
                          "'");
    }
    m.spec.Validate();
    m.train.Validate();
    for (const TrainConfig& t : m.member_train) t.Validate();
    if (m.spec.kind == ModelKind::kProposedEnsemble &&
        m.member_train.size() != m.spec.members.size()) {
      throw ArgumentError("ensemble needs one train config per member");
    }
  }
}

nlohmann::json ExperimentConfigToJson(const ExperimentConfig& config) {
  nlohmann::json methods = nlohmann::json::array();
  for (const MethodConfig& m : config.methods) {
    nlohmann::json j = {{"id", m.id},
                        {"spec", ModelSpecToJson(m.spec)},
                        {"train", TrainConfigToJson(m.train)}};
    if (!m.member_train.empty()) {
      nlohmann::json members = nlohmann::json::array();
      for (const TrainConfig& t : m.member_train) {
        members.push_back(TrainConfigToJson(t));
      }
      j["member_train"] = members;
    }
    methods.push_back(j);
  }
  return {{"global_seed", config.global_seed}, {"methods", methods}};
}

std::string ConfigHash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    Fnv1a64(ExperimentConfigToJson(config).dump())));
  return buf;
}

const std::vector<ImageSample>& ExperimentData::split(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kValidation:
      return validation;
    case Split::kTest:
      return test;
  }
  throw ArgumentError("unknown split");
}

ExperimentData LoadExperimentData(const std::filesystem::path& manifest) {
  ExperimentData data;
  data.manifest = LoadManifest(manifest);
  data.train = SplitView(data.manifest, Split::kTrain);
  data.validation = SplitView(data.manifest, Split::kValidation);
  data.test = SplitView(data.manifest, Split::kTest);
  for (Split s : kAllSplits) {
    for (const ImageSample& sample : data.split(s)) {
      const Shape& shape = sample.pixels.shape();
      if (shape[1] != shape[2]) {
        throw DataError(DataErrorKind::kMalformed,
                        "image '" + sample.id + "' is not square");
      }
      const int side = static_cast<int>(shape[1]);
      if (data.input_side == 0) data.input_side = side;
      if (side != data.input_side) {
        throw DataError(DataErrorKind::kMalformed,
                        "image '" + sample.id + "' is " +
                            std::to_string(side) + " pixels wide, expected " +
                            std::to_string(data.input_side));
      }
    }
  }
  if (data.input_side == 0) {
    throw DataError(DataErrorKind::kEmpty,
                    "manifest " + manifest.string() + " lists no images");
  }
  return data;
}

TrainedMethod TrainMethod(const ExperimentConfig& config, std::string_view id,
                          const ExperimentData& data, std::ostream* log) {
  const MethodConfig& m = config.method(id);
  if (data.train.empty() || data.validation.empty()) {
    throw DataError(DataErrorKind::kEmpty,
                    "training needs non-empty train and validation splits");
  }
  if (m.spec.input_side != data.input_side) {
    throw ArgumentError("method '" + m.id + "' expects " +
                        std::to_string(m.spec.input_side) +
                        "-pixel images, data has " +
                        std::to_string(data.input_side));
  }
  std::mutex mu;
  if (m.spec.kind != ModelKind::kProposedEnsemble) {
    Model model = BuildModel(m.spec);
    TrainReport report = Fit(model, data.train, data.validation, m.train);
    Log(log, mu,
        m.id + ": best epoch " + std::to_string(report.best_epoch) +
            ", validation accuracy " +
            std::to_string(report.validation[report.best_epoch].accuracy));
    return {m.id, report.best_model, MethodTrainJson(m, report)};
  }
  std::vector<Model> members;
  nlohmann::json member_reports = nlohmann::json::array();
  for (std::size_t i = 0; i < m.spec.members.size(); ++i) {
    Model member = BuildModel(m.spec.members[i]);
    TrainReport report =
        Fit(member, data.train, data.validation, m.member_train[i]);
    Log(log, mu,
        m.id + " member " + std::string(ModelKindName(m.spec.members[i].kind)) +
            ": best epoch " + std::to_string(report.best_epoch));
    member_reports.push_back(TrainReportToJson(report));
    members.push_back(report.best_model);
  }
  Model ensemble = BuildProposed(m.spec, members[0], members[1]);
  return {m.id, ensemble, {{"method", m.id}, {"members", member_reports}}};
}

std::filesystem::path ModelManifestPath(const std::filesystem::path& out_dir,
                                        std::string_view id) {
  return out_dir / (std::string(id) + ".model.json");
}

std::vector<std::filesystem::path> SaveMethodModel(
    const std::filesystem::path& out_dir, std::string_view id,
    const Model& model) {
  std::filesystem::create_directories(out_dir);
  const std::string stem(id);
  std::vector<std::filesystem::path> written;
  nlohmann::json weights = nlohmann::json::array();
  if (model.spec().kind == ModelKind::kProposedEnsemble) {
    const char* suffixes[] = {".resnet.lbm", ".vit.lbm"};
    for (std::size_t i = 0; i < model.members().size(); ++i) {
      const std::string name = stem + suffixes[i];
      SaveModel(model.members()[i], out_dir / name);
      written.push_back(out_dir / name);
      weights.push_back(name);
    }
  } else {
    const std::string name = stem + ".lbm";
    SaveModel(model, out_dir / name);
    written.push_back(out_dir / name);
    weights.push_back(name);
  }
  const nlohmann::json manifest = {{"version", kModelManifestVersion},
                                   {"method", stem},
                                   {"spec", ModelSpecToJson(model.spec())},
                                   {"weights", weights}};
  const auto path = ModelManifestPath(out_dir, id);
  WriteJson(path, manifest);
  written.push_back(path);
  return written;
}

Model LoadModelManifest(const std::filesystem::path& model_json) {
  std::ifstream f(model_json);
  if (!f) {
    throw ModelFileError(ModelFileErrorKind::kIo,
                         "cannot open model manifest " + model_json.string());
  }
  nlohmann::json j;
  std::vector<std::string> weights;
  ModelSpec spec;
  try {
    j = nlohmann::json::parse(f);
    if (j.at("version").get<int>() != kModelManifestVersion) {
      throw ModelFileError(ModelFileErrorKind::kVersion,
                           model_json.string() + ": unsupported version");
    }
    weights = j.at("weights").get<std::vector<std::string>>();
    spec = ModelSpecFromJson(j.at("spec"));
  } catch (const nlohmann::json::exception& e) {
    throw ModelFileError(ModelFileErrorKind::kIo,
                         model_json.string() + ": " + e.what());
  }
  const auto dir = model_json.parent_path();
  if (spec.kind == ModelKind::kProposedEnsemble) {
    if (weights.size() != spec.members.size()) {
      throw ModelFileError(ModelFileErrorKind::kMissingParameter,
                           model_json.string() +
                               ": ensemble needs one weight file per member");
    }
    Model resnet = LoadModel(dir / weights[0], spec.members[0]);
    Model vit = LoadModel(dir / weights[1], spec.members[1]);
    return BuildProposed(spec, resnet, vit);
  }
  if (weights.size() != 1) {
    throw ModelFileError(ModelFileErrorKind::kMissingParameter,
                         model_json.string() + ": expected one weight file");
  }
  return LoadModel(dir / weights[0], spec);
}

Model LoadMethodModel(const std::filesystem::path& out_dir,
                      std::string_view id) {
  RequireMethodId(id);
  return LoadModelManifest(ModelManifestPath(out_dir, id));
}

Predictions OraclePredictions(std::span<const ImageSample> samples) {
  Predictions p;
  p.class_names = DefaultClassNames();
  for (const ImageSample& s : samples) {
    p.ids.push_back(s.id);
    p.truth.push_back(LabelIndex(s.label));
    std::vector<double> row(kNumClasses, 0.0);
    row[static_cast<std::size_t>(LabelIndex(s.label))] = 1.0;
    p.scores.push_back(std::move(row));
  }
  return p;
}

void WriteEvaluation(const std::filesystem::path& out_dir, std::string_view id,
                     Split split, const Predictions& predictions,
                     const MetricsReport& report) {
  std::filesystem::create_directories(out_dir);
  const std::string stem = std::string(id) + "." + std::string(SplitName(split));
  WritePredictionsCsv(predictions, out_dir / (stem + ".predictions.csv"));
  nlohmann::json j = MetricsReportToJson(report);
  j["method"] = std::string(id);
  j["split"] = std::string(SplitName(split));
  WriteJson(out_dir / (stem + ".metrics.json"), j);
  WriteText(out_dir / (stem + ".metrics.txt"), MetricsReportToText(report));
}

int ThreadsFromEnv() {
  const char* env = std::getenv("LUNGBENCH_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 256) {
    throw ArgumentError(std::string("LUNGBENCH_THREADS must be an integer in "
                                    "[1, 256], got '") +
                        env + "'");
  }
  return static_cast<int>(v);
}

ComparisonReport RunCompare(const ExperimentConfig& config,
                            const ExperimentData& data, int threads,
                            std::ostream* log) {
  config.Validate();
  Provenance provenance;
  provenance.seed = config.global_seed;
  provenance.config_hash = ConfigHash(config);
  provenance.manifest = config.manifest.string();
  provenance.started_at = UtcTimestamp();
  provenance.threads = threads;

  std::filesystem::create_directories(config.out_dir);
  WriteJson(config.out_dir / "compare.config.json",
            ExperimentConfigToJson(config));

  const std::vector<std::string> class_names = DefaultClassNames();
  const std::size_t n = kMethodIds.size();
  std::vector<std::optional<Model>> models(n);
  std::vector<std::optional<MethodMetrics>> results(n);
  std::vector<std::exception_ptr> failures(n);
  std::mutex mu;

  auto finish = [&](std::size_t i, TrainedMethod trained) {
    const std::string& id = trained.id;
    SaveMethodModel(config.out_dir, id, trained.model);
    WriteJson(config.out_dir / (id + ".train.json"), trained.train_report);
    Predictions predictions = Predict(trained.model, data.test, class_names);
    MetricsReport report = ComputeReport(predictions);
    WriteEvaluation(config.out_dir, id, Split::kTest, predictions, report);
    Log(log, mu,
        id + ": test mean accuracy " + std::to_string(report.mean.accuracy));
    std::lock_guard<std::mutex> lock(mu);
    models[i] = trained.model;
    results[i] = MethodMetrics{id, std::string(MethodDisplayName(id)), report};
  };

  // Everything except the ensemble trains independently.
  const std::size_t ensemble = n - 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < ensemble; i = next++) {
      try {
        Log(log, mu, "training " + std::string(kMethodIds[i]));
        finish(i, TrainMethod(config, kMethodIds[i], data, log));
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, ensemble));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // The ensemble's members are exactly the resnet_style and vit runs when
  // their settings agree, so their snapshots are reused instead of retrained.
  const bool failed_base = std::any_of(failures.begin(), failures.end(),
                                       [](const auto& e) { return bool(e); });
  if (!failed_base) {
    try {
      const MethodConfig& p = config.method("proposed");
      const MethodConfig& r = config.method("resnet_style");
      const MethodConfig& v = config.method("vit");
      const bool reuse =
          ModelSpecToJson(p.spec.members[0]) == ModelSpecToJson(r.spec) &&
          ModelSpecToJson(p.spec.members[1]) == ModelSpecToJson(v.spec) &&
          TrainConfigToJson(p.member_train[0]) == TrainConfigToJson(r.train) &&
          TrainConfigToJson(p.member_train[1]) == TrainConfigToJson(v.train);
      if (reuse) {
        Log(log, mu, "assembling proposed from resnet_style and vit");
        nlohmann::json train_report = {
            {"method", "proposed"},
            {"members", {"resnet_style.train.json", "vit.train.json"}}};
        finish(ensemble,
               {"proposed",
                BuildProposed(p.spec, models[2]->Clone(), models[3]->Clone()),
                train_report});
      } else {
        Log(log, mu, "training proposed");
        finish(ensemble, TrainMethod(config, "proposed", data, log));
      }
    } catch (...) {
      failures[ensemble] = std::current_exception();
    }
  }

  std::vector<MethodMetrics> done;
  for (const auto& r : results) {
    if (r) done.push_back(*r);
  }
  for (const std::exception_ptr& e : failures) {
    if (!e) continue;
    provenance.finished_at = UtcTimestamp();
    WriteJson(config.out_dir / "compare.partial.json",
              ComparisonReportToJson(BuildComparisonReport(done, provenance)));
    std::rethrow_exception(e);
  }
  provenance.finished_at = UtcTimestamp();
  ComparisonReport report = BuildComparisonReport(done, provenance);
  WriteJson(config.out_dir / "compare.json", ComparisonReportToJson(report));
  WriteText(config.out_dir / "compare.txt", ComparisonReportToText(report));
  return report;
}

}  // namespace lungbench
