#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lungbench/augment.h"
#include "lungbench/dataset.h"
#include "lungbench/graph.h"
#include "lungbench/models.h"

namespace lungbench {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t global_seed = 7;
  AugmentConfig augment;

  void Validate() const;
};

nlohmann::json TrainConfigToJson(const TrainConfig& config);

// Mean over the batch of -log softmax(logits)[label].
Tensor CrossEntropy(Graph& graph, const Tensor& logits,
                    std::span<const int> labels);

// One velocity per parameter, zero-initialized.
struct OptimizerState {
  std::vector<Tensor> velocity;

  static OptimizerState ZerosLike(std::span<const Tensor> params);
};

// v <- mu * v + g;  w <- w - lr * v, using each parameter's grad slot as g.
void SgdMomentumStep(std::span<Tensor> params, OptimizerState& state,
                     double learning_rate, double momentum);

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

// One pass over train_samples in an order shuffled by (global_seed, epoch),
// in mini-batches of config.batch_size (the last one may be short), with
// augmentation applied when enabled. Loss is the sample-weighted mean.
EpochStats TrainEpoch(Model& model, std::span<const ImageSample> train_samples,
                      const TrainConfig& config, int epoch,
                      OptimizerState& state);

// Loss and accuracy without augmentation or gradient recording.
EpochStats EvaluateLoss(const Model& model, std::span<const ImageSample> samples,
                        int batch_size = 64);

struct TrainReport {
  std::vector<EpochStats> train;
  std::vector<EpochStats> validation;
  int best_epoch = -1;
  Model best_model;
};

// Earliest index of the maximum.
int SelectBestEpoch(std::span<const double> validation_accuracy);

// Runs config.epochs epochs, evaluating validation after each and keeping a
// snapshot at every strict improvement of validation accuracy. model is left
// in its final (last-epoch) state.
TrainReport Fit(Model& model, std::span<const ImageSample> train_samples,
                std::span<const ImageSample> val_samples,
                const TrainConfig& config);

nlohmann::json TrainReportToJson(const TrainReport& report);

}  // namespace lungbench
