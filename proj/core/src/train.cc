#include "lungbench/train.h"

#include <algorithm>
#include <numeric>

#include "lungbench/error.h"
#include "lungbench/random.h"

namespace lungbench {
namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;  // "shuffle"

std::size_t ArgMax(std::span<const double> row) {
  return static_cast<std::size_t>(
      std::max_element(row.begin(), row.end()) - row.begin());
}

std::size_t CountCorrect(const Tensor& logits, std::span<const int> labels) {
  const std::size_t c = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<int>(ArgMax(logits.values().subspan(i * c, c))) == labels[i]) {
      ++correct;
    }
  }
  return correct;
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0)) {
    throw ArgumentError("learning_rate must be non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ArgumentError("momentum must lie in [0, 1)");
  }
  if (epochs <= 0) throw ArgumentError("epochs must be positive");
  if (batch_size <= 0) throw ArgumentError("batch_size must be positive");
  augment.Validate();
}

nlohmann::json TrainConfigToJson(const TrainConfig& config) {
  return {
      {"learning_rate", config.learning_rate},
      {"momentum", config.momentum},
      {"epochs", config.epochs},
      {"batch_size", config.batch_size},
      {"global_seed", config.global_seed},
      {"augment",
       {{"enabled", config.augment.enabled},
        {"rotation_max_degrees", config.augment.rotation_max_degrees},
        {"zoom", {config.augment.zoom_low, config.augment.zoom_high}},
        {"gain", {config.augment.gain_low, config.augment.gain_high}},
        {"bias", {config.augment.bias_low, config.augment.bias_high}}}},
  };
}

Tensor CrossEntropy(Graph& graph, const Tensor& logits,
                    std::span<const int> labels) {
  return graph.CrossEntropy(logits, labels);
}

OptimizerState OptimizerState::ZerosLike(std::span<const Tensor> params) {
  OptimizerState state;
  state.velocity.reserve(params.size());
  for (const Tensor& p : params) state.velocity.push_back(Tensor::Zeros(p.shape()));
  return state;
}

void SgdMomentumStep(std::span<Tensor> params, OptimizerState& state,
                     double learning_rate, double momentum) {
  if (state.velocity.size() != params.size()) {
    throw ShapeError("sgd: " + std::to_string(state.velocity.size()) +
                     " velocities for " + std::to_string(params.size()) +
                     " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i];
    Tensor& v = state.velocity[i];
    if (v.shape() != w.shape()) {
      throw ShapeError("sgd: velocity " + ShapeToString(v.shape()) +
                       " does not match parameter " + ShapeToString(w.shape()));
    }
    if (!w.requires_grad()) {
      throw ArgumentError("sgd: parameter " + std::to_string(i) +
                          " has no gradient slot");
    }
    auto g = w.grad();
    auto wv = w.mutable_values();
    auto vv = v.mutable_values();
    for (std::size_t j = 0; j < wv.size(); ++j) {
      vv[j] = momentum * vv[j] + g[j];
      wv[j] = wv[j] - learning_rate * vv[j];
    }
  }
}

EpochStats TrainEpoch(Model& model, std::span<const ImageSample> train_samples,
                      const TrainConfig& config, int epoch,
                      OptimizerState& state) {
  if (train_samples.empty()) {
    throw DataError(DataErrorKind::kEmpty, "training set is empty");
  }
  config.Validate();
  const std::size_t n = train_samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(MixSeed(config.global_seed, kShuffleStream,
                  static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.Below(i + 1)]);
  }

  std::vector<Tensor> params = model.parameters();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<ImageSample> batch;
  std::vector<int> labels;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batch.clear();
    labels.clear();
    for (std::size_t i = start; i < end; ++i) {
      const ImageSample& s = train_samples[order[i]];
      batch.push_back(Augment(s, config.augment,
                              static_cast<std::uint64_t>(epoch),
                              config.global_seed));
      labels.push_back(LabelIndex(s.label));
    }
    Graph graph;
    Tensor logits = model.Forward(graph, StackPixels(batch));
    Tensor loss = CrossEntropy(graph, logits, labels);
    graph.Backward(loss);
    SgdMomentumStep(params, state, config.learning_rate, config.momentum);
    loss_sum += loss.item() * static_cast<double>(end - start);
    correct += CountCorrect(logits, labels);
  }
  return EpochStats{loss_sum / static_cast<double>(n),
                    static_cast<double>(correct) / static_cast<double>(n)};
}

EpochStats EvaluateLoss(const Model& model, std::span<const ImageSample> samples,
                        int batch_size) {
  if (samples.empty()) {
    throw DataError(DataErrorKind::kEmpty, "evaluation set is empty");
  }
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    auto chunk = samples.subspan(start, std::min(bs, samples.size() - start));
    std::vector<int> labels;
    for (const ImageSample& s : chunk) labels.push_back(LabelIndex(s.label));
    Graph graph(GradMode::kDisabled);
    Tensor logits = model.Forward(graph, StackPixels(chunk));
    loss_sum += graph.CrossEntropy(logits, labels).item() *
                static_cast<double>(chunk.size());
    correct += CountCorrect(logits, labels);
  }
  const auto total = static_cast<double>(samples.size());
  return EpochStats{loss_sum / total, static_cast<double>(correct) / total};
}

int SelectBestEpoch(std::span<const double> validation_accuracy) {
  if (validation_accuracy.empty()) return -1;
  return static_cast<int>(std::max_element(validation_accuracy.begin(),
                                           validation_accuracy.end()) -
                          validation_accuracy.begin());
}

TrainReport Fit(Model& model, std::span<const ImageSample> train_samples,
                std::span<const ImageSample> val_samples,
                const TrainConfig& config) {
  if (val_samples.empty()) {
    throw DataError(DataErrorKind::kEmpty, "validation set is empty");
  }
  config.Validate();
  std::vector<Tensor> params = model.parameters();
  OptimizerState state = OptimizerState::ZerosLike(params);
  TrainReport report{.train = {}, .validation = {}, .best_epoch = -1,
                     .best_model = model.Clone()};
  double best_accuracy = -1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    report.train.push_back(
        TrainEpoch(model, train_samples, config, epoch, state));
    const EpochStats val = EvaluateLoss(model, val_samples);
    report.validation.push_back(val);
    if (val.accuracy > best_accuracy) {
      best_accuracy = val.accuracy;
      report.best_epoch = epoch;
      report.best_model.CopyValuesFrom(model);
    }
  }
  return report;
}

nlohmann::json TrainReportToJson(const TrainReport& report) {
  nlohmann::json j;
  std::vector<double> tl, ta, vl, va;
  for (const EpochStats& s : report.train) {
    tl.push_back(s.loss);
    ta.push_back(s.accuracy);
  }
  for (const EpochStats& s : report.validation) {
    vl.push_back(s.loss);
    va.push_back(s.accuracy);
  }
  j["train_loss"] = tl;
  j["train_accuracy"] = ta;
  j["validation_loss"] = vl;
  j["validation_accuracy"] = va;
  j["best_epoch"] = report.best_epoch;
  return j;
}

}  // namespace lungbench
