#include "checks.h"

#include <cmath>
#include <functional>
#include <vector>

#include "lungbench/augment.h"
#include "lungbench/dataset.h"
#include "lungbench/grad_check.h"
#include "lungbench/graph.h"
#include "lungbench/synthetic.h"
#include "lungbench/train.h"
#include "oracles.h"

namespace lungbench::testing {
namespace {

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  std::function<Tensor(Graph&, std::vector<Tensor>&)> apply;
  double lo = -1.0;
  double hi = 1.0;
};

std::vector<OpCase> OpCases(Rng& rng) {
  std::vector<int> labels;
  for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.Below(5)));
  std::vector<OpCase> c;
  c.push_back({"add", {{3, 4}, {3, 4}},
               [](Graph& g, auto& in) { return g.Add(in[0], in[1]); }});
  c.push_back({"add_broadcast", {{2, 3, 4}, {2, 3, 1}},
               [](Graph& g, auto& in) { return g.Add(in[0], in[1]); }});
  c.push_back({"add_row", {{3, 4}, {4}},
               [](Graph& g, auto& in) { return g.AddRow(in[0], in[1]); }});
  c.push_back({"mul", {{3, 4}, {3, 4}},
               [](Graph& g, auto& in) { return g.Mul(in[0], in[1]); }});
  c.push_back({"mul_scalar", {{3, 4}},
               [](Graph& g, auto& in) { return g.MulScalar(in[0], -1.7); }});
  c.push_back({"matmul", {{3, 4}, {4, 2}},
               [](Graph& g, auto& in) { return g.MatMul(in[0], in[1]); }});
  c.push_back({"transpose", {{3, 4}},
               [](Graph& g, auto& in) { return g.Transpose(in[0]); }});
  c.push_back({"conv2d_s1p1", {{2, 5, 5}, {3, 2, 3, 3}, {3}},
               [](Graph& g, auto& in) {
                 return g.Conv2d(in[0], in[1], in[2], 1, 1);
               }});
  c.push_back({"conv2d_s2p0", {{2, 6, 6}, {2, 2, 3, 3}, {2}},
               [](Graph& g, auto& in) {
                 return g.Conv2d(in[0], in[1], in[2], 2, 0);
               }});
  c.push_back({"conv2d_s2p1", {{1, 7, 7}, {2, 1, 3, 3}, {2}},
               [](Graph& g, auto& in) {
                 return g.Conv2d(in[0], in[1], in[2], 2, 1);
               }});
  c.push_back({"max_pool2d", {{2, 6, 6}},
               [](Graph& g, auto& in) { return g.MaxPool2d(in[0], 2, 2); }});
  c.push_back({"max_pool2d_overlap", {{1, 5, 5}},
               [](Graph& g, auto& in) { return g.MaxPool2d(in[0], 3, 1); }});
  c.push_back({"relu", {{3, 4}},
               [](Graph& g, auto& in) { return g.Relu(in[0]); }});
  c.push_back({"softmax", {{3, 5}},
               [](Graph& g, auto& in) { return g.Softmax(in[0]); }});
  c.push_back({"log", {{3, 4}},
               [](Graph& g, auto& in) { return g.Log(in[0]); }, 0.5, 2.0});
  c.push_back({"layer_norm", {{3, 6}, {6}, {6}},
               [](Graph& g, auto& in) {
                 return g.LayerNorm(in[0], in[1], in[2], kLayerNormEps);
               }});
  c.push_back({"sum", {{3, 4}},
               [](Graph& g, auto& in) { return g.Sum(in[0]); }});
  c.push_back({"mean", {{3, 4}},
               [](Graph& g, auto& in) { return g.Mean(in[0]); }});
  c.push_back({"mean_rows", {{4, 3}},
               [](Graph& g, auto& in) { return g.MeanRows(in[0]); }});
  c.push_back({"reshape", {{3, 4}},
               [](Graph& g, auto& in) { return g.Reshape(in[0], {2, 6}); }});
  c.push_back({"select", {{3, 2, 2}},
               [](Graph& g, auto& in) { return g.Select(in[0], 1); }});
  c.push_back({"stack", {{2, 3}, {2, 3}, {2, 3}},
               [](Graph& g, auto& in) { return g.Stack(in); }});
  c.push_back({"concat_rows", {{2, 3}, {1, 3}},
               [](Graph& g, auto& in) { return g.ConcatRows(in); }});
  c.push_back({"concat_cols", {{3, 2}, {3, 1}},
               [](Graph& g, auto& in) { return g.ConcatCols(in); }});
  c.push_back({"slice_cols", {{3, 5}},
               [](Graph& g, auto& in) { return g.SliceCols(in[0], 1, 3); }});
  c.push_back({"gather", {{3, 4}},
               [](Graph& g, auto& in) {
                 return g.Gather(in[0], {0, 5, 5, 11, 2, 0}, {2, 3});
               }});
  c.push_back({"cross_entropy", {{4, 5}},
               [labels](Graph& g, auto& in) {
                 return g.CrossEntropy(in[0], labels);
               }});
  return c;
}

void Track(GradSuiteResult& r, double err, const std::string& name,
           std::uint64_t seed) {
  ++r.cases;
  if (!(err <= r.max_error)) {
    r.max_error = err;
    r.worst = name + "@" + std::to_string(seed);
  }
}

}  // namespace

GradSuiteResult PrimitiveGradSuite(int seeds, double eps) {
  GradSuiteResult result;
  for (int s = 1; s <= seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    Rng rng(MixSeed(seed, 0x9a7));
    for (OpCase& op : OpCases(rng)) {
      std::vector<Tensor> inputs;
      for (const Shape& shape : op.shapes) {
        inputs.push_back(RandomTensor(shape, rng, op.lo, op.hi, true));
      }
      // Probe the output shape once to size the weighting tensor.
      Graph probe(GradMode::kDisabled);
      const Tensor shape_probe = op.apply(probe, inputs);
      const Tensor weight = RandomTensor(shape_probe.shape(), rng);
      auto loss = [&](Graph& g) {
        Tensor out = op.apply(g, inputs);
        if (out.rank() == 0) return out;
        return g.Sum(g.Mul(out, weight));
      };
      Track(result, GradCheck(loss, inputs, eps), op.name, seed);
    }
  }
  return result;
}

ModelSpec ToySpec(ModelKind kind, std::uint64_t seed, int side) {
  ModelSpec spec;
  spec.kind = kind;
  spec.input_side = side;
  spec.num_classes = 5;
  spec.init_seed = seed;
  spec.cnn_widths = {2, 2, 3, 3};
  spec.resnet_width = 3;
  spec.resnet_blocks = 2;
  spec.patch_size = 4;
  spec.embed_dim = 4;
  spec.num_heads = 2;
  spec.mlp_dim = 6;
  spec.num_layers = 2;
  if (kind == ModelKind::kProposedEnsemble) {
    spec.members = {ToySpec(ModelKind::kResNetStyle, seed, side),
                    ToySpec(ModelKind::kViT, MixSeed(seed, 1), side)};
  }
  return spec;
}

GradSuiteResult ModelGradSuite(ModelKind kind, int seeds, double eps,
                               int side) {
  GradSuiteResult result;
  for (int s = 1; s <= seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    Model model = BuildModel(ToySpec(kind, seed, side));
    Rng rng(MixSeed(seed, 0x30de1));
    std::vector<Tensor> params = model.parameters();
    for (Tensor& p : params) {
      for (double& v : p.mutable_values()) v = rng.Uniform(-0.5, 0.5);
    }
    const auto n = static_cast<std::size_t>(side);
    const Tensor batch = RandomTensor({2, 1, n, n}, rng, 0.0, 1.0);
    const std::vector<int> labels = {static_cast<int>(rng.Below(5)),
                                     static_cast<int>(rng.Below(5))};
    auto loss = [&](Graph& g) {
      return CrossEntropy(g, model.Forward(g, batch), labels);
    };
    Track(result, GradCheck(loss, params, eps),
          std::string(ModelKindName(kind)), seed);
  }
  return result;
}

MetricFuzzResult MetricOracleFuzz(int instances, std::uint64_t seed) {
  MetricFuzzResult r;
  Rng rng(seed);
  auto fail = [&r](const std::string& what) {
    ++r.mismatches;
    if (r.first_failure.empty()) r.first_failure = what;
  };
  for (int inst = 0; inst < instances; ++inst) {
    const std::size_t n = 2 + rng.Below(11);
    const int positive = static_cast<int>(rng.Below(5));
    std::vector<int> truth(n), predicted(n);
    do {
      for (int& t : truth) t = static_cast<int>(rng.Below(5));
    } while (std::count(truth.begin(), truth.end(), positive) == 0 ||
             std::count(truth.begin(), truth.end(), positive) ==
                 static_cast<long>(n));
    for (int& p : predicted) p = static_cast<int>(rng.Below(5));
    const bool coarse = rng.Below(2) == 0;
    std::vector<double> scores(n);
    for (double& s : scores) {
      s = coarse ? static_cast<double>(rng.Below(5)) / 4.0 : rng.Uniform();
    }
    ++r.instances;
    const std::string tag = "instance " + std::to_string(inst);

    const ConfusionCounts c = CountConfusion(predicted, truth, positive);
    const BruteCounts b = CountBySample(predicted, truth, positive);
    auto ratio = [](std::int64_t num, std::int64_t den) {
      return den == 0 ? 0.0
                      : static_cast<double>(num) / static_cast<double>(den);
    };
    bool deg = false;
    if (Accuracy(c, &deg) != ratio(b.agree, b.n) || deg) fail(tag + " accuracy");
    if (Sensitivity(c, &deg) != ratio(b.hits, b.positives) ||
        deg != (b.positives == 0)) {
      fail(tag + " sensitivity");
    }
    if (Specificity(c, &deg) != ratio(b.rejections, b.negatives) ||
        deg != (b.negatives == 0)) {
      fail(tag + " specificity");
    }
    const double f1 = ratio(2 * b.hits, b.predicted + b.positives);
    if (F1(c, &deg) != f1 || deg != (b.predicted + b.positives == 0)) {
      fail(tag + " f1");
    }
    if (Dice(c, &deg) != f1) fail(tag + " dice");
    // Pearson correlation of the two indicator vectors in integer form.
    const std::int64_t cov = b.n * b.hits - b.predicted * b.positives;
    const std::int64_t var =
        (b.n * b.predicted - b.predicted * b.predicted) *
        (b.n * b.positives - b.positives * b.positives);
    const double mcc = var == 0 ? 0.0
                                : static_cast<double>(cov) /
                                      std::sqrt(static_cast<double>(var));
    if (Mcc(c, &deg) != mcc || deg != (var == 0)) fail(tag + " mcc");

    std::vector<int> binary(n);
    for (std::size_t i = 0; i < n; ++i) binary[i] = truth[i] == positive;
    const double auc = Auc(ComputeRocCurve(scores, binary));
    const double err = std::abs(auc - MannWhitneyAuc(scores, binary));
    r.max_auc_error = std::max(r.max_auc_error, err);
    if (err > 1e-12) fail(tag + " auc");
  }
  return r;
}

AugmentFuzzResult AugmentRangeFuzz(int calls, std::uint64_t seed) {
  AugmentFuzzResult r;
  Rng rng(seed);
  for (int i = 0; i < calls; ++i) {
    const std::size_t side = 8 + 4 * rng.Below(3);
    ImageSample sample;
    sample.id = "fuzz/" + std::to_string(rng.NextU64());
    sample.pixels = RandomTensor({1, side, side}, rng, 0.0, 1.0);
    AugmentConfig config;
    config.enabled = true;
    config.rotation_max_degrees = rng.Uniform(0.0, 180.0);
    config.zoom_low = rng.Uniform(0.3, 1.0);
    config.zoom_high = rng.Uniform(1.0, 3.0);
    config.gain_low = rng.Uniform(0.1, 2.0);
    config.gain_high = config.gain_low + rng.Uniform(0.0, 2.0);
    config.bias_low = rng.Uniform(-1.0, 0.5);
    config.bias_high = config.bias_low + rng.Uniform(0.0, 1.0);
    const ImageSample out =
        Augment(sample, config, rng.Below(1000), rng.NextU64());
    ++r.calls;
    for (double v : out.pixels.values()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        ++r.out_of_range;
        break;
      }
    }
  }
  return r;
}

int SingleSampleOverfitEpoch(std::uint64_t seed, int max_epochs,
                             double threshold) {
  ModelSpec spec;
  spec.kind = ModelKind::kBasicCnn;
  spec.init_seed = seed;
  Model model = BuildModel(spec);
  const auto label = kAllLabels[seed % kNumClasses];
  const std::vector<ImageSample> one = {
      {"overfit", SynthesizeImage(label, spec.input_side, seed), label,
       Split::kTrain}};
  TrainConfig config;
  config.batch_size = 1;
  config.global_seed = seed;
  OptimizerState state = OptimizerState::ZerosLike(model.parameters());
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    if (TrainEpoch(model, one, config, epoch, state).loss < threshold) {
      return epoch;
    }
  }
  return -1;
}

}  // namespace lungbench::testing
