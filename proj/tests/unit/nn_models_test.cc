#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "checks.h"
#include "lungbench/error.h"
#include "lungbench/graph.h"
#include "lungbench/model_io.h"
#include "lungbench/models.h"
#include "oracles.h"

namespace lungbench {
namespace {

namespace fs = std::filesystem;
using testing::RandomTensor;

std::vector<double> Values(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

void Fill(const Tensor& t, double value) {
  std::fill(t.mutable_values().begin(), t.mutable_values().end(), value);
}

ModelSpec SpecOf(ModelKind kind, int side = 16) {
  return testing::ToySpec(kind, 5, side);
}

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lungbench_models_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

AttentionBlockParams RandomAttention(std::size_t d, std::size_t mlp,
                                     std::size_t heads, Rng& rng) {
  AttentionBlockParams p;
  p.num_heads = heads;
  p.ln1_gamma = RandomTensor({d}, rng, 0.5, 1.5);
  p.ln1_beta = RandomTensor({d}, rng);
  p.wq = RandomTensor({d, d}, rng);
  p.bq = RandomTensor({d}, rng);
  p.wk = RandomTensor({d, d}, rng);
  p.bk = RandomTensor({d}, rng);
  p.wv = RandomTensor({d, d}, rng);
  p.bv = RandomTensor({d}, rng);
  p.wo = RandomTensor({d, d}, rng);
  p.bo = RandomTensor({d}, rng);
  p.ln2_gamma = RandomTensor({d}, rng, 0.5, 1.5);
  p.ln2_beta = RandomTensor({d}, rng);
  p.w1 = RandomTensor({d, mlp}, rng);
  p.b1 = RandomTensor({mlp}, rng);
  p.w2 = RandomTensor({mlp, d}, rng);
  p.b2 = RandomTensor({d}, rng);
  return p;
}

TEST(BasicCnn, ForwardShape) {
  ModelSpec spec;
  const Model model = BuildBasicCnn(spec);
  Graph g;
  EXPECT_EQ(model.Forward(g, Tensor::Zeros({2, 1, 32, 32})).shape(),
            (Shape{2, 5}));
}

TEST(BasicCnn, ZeroDenseGivesUniformSoftmax) {
  ModelSpec spec;
  const Model model = BuildBasicCnn(spec);
  Fill(model.param("dense.weight"), 0.0);
  Fill(model.param("dense.bias"), 0.0);
  Rng rng(1);
  Graph g;
  const Tensor logits = model.Forward(g, RandomTensor({3, 1, 32, 32}, rng, 0, 1));
  for (double v : logits.values()) EXPECT_EQ(v, 0.0);
  const Tensor probs = g.Softmax(logits);
  for (double p : probs.values()) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(BasicCnn, ParameterCountMatchesLayerArithmetic) {
  ModelSpec spec;
  // 3x3 convs 1->4->4->8->8, two 2x2 pools take 32 to 8, dense 8*8*8 -> 5.
  const std::size_t convs = (4 * 1 * 9 + 4) + (4 * 4 * 9 + 4) +
                            (8 * 4 * 9 + 8) + (8 * 8 * 9 + 8);
  const std::size_t dense = 8 * 8 * 8 * 5 + 5;
  EXPECT_EQ(BasicCnnParameterCount(spec), convs + dense);
  EXPECT_EQ(BuildBasicCnn(spec).num_parameters(), convs + dense);
}

TEST(BasicCnn, LayerSequence) {
  ModelSpec spec;
  spec.input_side = 8;
  const Model model = BuildBasicCnn(spec);
  Graph g;
  model.Forward(g, Tensor::Zeros({1, 1, 8, 8}));
  std::vector<std::string> convs_pools;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto op = g.op_name(i);
    if (op == "conv2d" || op == "max_pool2d" || op == "matmul") {
      convs_pools.emplace_back(op);
    }
  }
  EXPECT_EQ(convs_pools,
            (std::vector<std::string>{"conv2d", "conv2d", "max_pool2d", "conv2d",
                                      "conv2d", "max_pool2d", "matmul"}));
}

TEST(Models, RejectBadInputSide) {
  ModelSpec spec;
  spec.input_side = 0;
  EXPECT_THROW(BuildBasicCnn(spec), ArgumentError);
  const Model model = BuildBasicCnn(ModelSpec{});
  Graph g;
  EXPECT_THROW(model.Forward(g, Tensor::Zeros({1, 1, 32, 16})), ShapeError);
}

TEST(Models, ForwardShapeForBatchSizes1To8) {
  for (ModelKind kind : {ModelKind::kBasicCnn, ModelKind::kResNetStyle,
                         ModelKind::kViT, ModelKind::kProposedEnsemble}) {
    const Model model = BuildModel(SpecOf(kind));
    for (std::size_t n = 1; n <= 8; ++n) {
      Graph g(GradMode::kDisabled);
      EXPECT_EQ(model.Forward(g, Tensor::Zeros({n, 1, 16, 16})).shape(),
                (Shape{n, 5}))
          << ModelKindName(kind) << " batch " << n;
    }
  }
}

TEST(Models, InitializationIsGlorotAndSeeded) {
  const ModelSpec spec;
  const Model a = BuildBasicCnn(spec);
  const Model b = BuildBasicCnn(spec);
  const double bound = std::sqrt(6.0 / (1 * 9 + 4 * 9));
  for (double v : a.param("conv1.weight").values()) {
    EXPECT_LE(std::abs(v), bound);
  }
  for (double v : a.param("conv1.bias").values()) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(Values(a.params()[i].value), Values(b.params()[i].value));
  }
}

TEST(ResidualBlock, ZeroSecondConvIsRelu) {
  Rng rng(2);
  const Tensor x = RandomTensor({2, 4, 4}, rng);
  const ResidualBlockParams p{RandomTensor({2, 2, 3, 3}, rng),
                              RandomTensor({2}, rng), Tensor::Zeros({2, 2, 3, 3}),
                              Tensor::Zeros({2})};
  Graph g;
  EXPECT_EQ(Values(ResidualBlock(g, x, p)), Values(g.Relu(x)));
  const Tensor nonneg = RandomTensor({2, 4, 4}, rng, 0, 1);
  EXPECT_EQ(Values(ResidualBlock(g, nonneg, p)), Values(nonneg));
}

TEST(ResidualBlock, ZeroInputZeroBiasGivesZero) {
  Rng rng(3);
  const ResidualBlockParams p{RandomTensor({2, 2, 3, 3}, rng), Tensor::Zeros({2}),
                              RandomTensor({2, 2, 3, 3}, rng), Tensor::Zeros({2})};
  Graph g;
  const Tensor out = ResidualBlock(g, Tensor::Zeros({2, 4, 4}), p);
  for (double v : out.values()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(ResidualBlock, MatchesComposedOracle) {
  Rng rng(4);
  const Tensor x = RandomTensor({2, 4, 4}, rng);
  const ResidualBlockParams p{RandomTensor({2, 2, 3, 3}, rng), RandomTensor({2}, rng),
                              RandomTensor({2, 2, 3, 3}, rng), RandomTensor({2}, rng)};
  std::vector<double> h = testing::DirectConv2d(x, p.conv1_weight, p.conv1_bias, 1, 1);
  for (double& v : h) v = std::max(0.0, v);
  std::vector<double> y = testing::DirectConv2d(Tensor::FromValues({2, 4, 4}, h),
                                                p.conv2_weight, p.conv2_bias, 1, 1);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = std::max(0.0, y[i] + x.values()[i]);
  }
  Graph g;
  EXPECT_EQ(Values(ResidualBlock(g, x, p)), y);
}

TEST(ResidualBlock, ChannelMismatchThrows) {
  const ResidualBlockParams p{Tensor::Zeros({3, 3, 3, 3}), Tensor::Zeros({3}),
                              Tensor::Zeros({3, 3, 3, 3}), Tensor::Zeros({3})};
  Graph g;
  EXPECT_THROW(ResidualBlock(g, Tensor::Zeros({2, 4, 4}), p), ShapeError);
}

TEST(ResNet, ZeroBranchesCollapseToStemPoolDense) {
  ModelSpec spec = SpecOf(ModelKind::kResNetStyle, 8);
  const Model model = BuildModel(spec);
  for (int b = 0; b < spec.resnet_blocks; ++b) {
    Fill(model.param("block" + std::to_string(b) + ".conv2.weight"), 0.0);
    Fill(model.param("block" + std::to_string(b) + ".conv2.bias"), 0.0);
  }
  Rng rng(5);
  Fill(model.param("stem.bias"), 0.1);
  const Tensor image = RandomTensor({1, 8, 8}, rng, 0, 1);
  std::vector<double> standardized(64);
  for (std::size_t i = 0; i < 64; ++i) {
    standardized[i] = (image.values()[i] - spec.input_mean) * (1.0 / spec.input_std);
  }
  std::vector<double> stem = testing::DirectConv2d(
      Tensor::FromValues({1, 8, 8}, standardized), model.param("stem.weight"),
      model.param("stem.bias"), 2, 1);
  const std::size_t width = 3, hw = stem.size() / width;
  std::vector<double> pooled(width, 0.0);
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t i = 0; i < hw; ++i) pooled[c] += std::max(0.0, stem[c * hw + i]);
    pooled[c] /= static_cast<double>(hw);
  }
  const Tensor& w = model.param("dense.weight");
  const Tensor& b = model.param("dense.bias");
  Graph g;
  const Tensor logits = model.Forward(g, Tensor::FromValues({1, 1, 8, 8}, Values(image)));
  for (std::size_t k = 0; k < 5; ++k) {
    double z = 0.0;
    for (std::size_t c = 0; c < width; ++c) z += pooled[c] * w.values()[c * 5 + k];
    EXPECT_NEAR(logits.values()[k], z + b.values()[k], 1e-12);
  }
}

TEST(ResNet, StemGradientIsNonzero) {
  const Model model = BuildModel(SpecOf(ModelKind::kResNetStyle, 8));
  Rng rng(6);
  const Tensor batch = RandomTensor({2, 1, 8, 8}, rng, 0, 1);
  const std::vector<int> labels = {1, 3};
  Graph g;
  g.Backward(g.CrossEntropy(model.Forward(g, batch), labels));
  const auto grad = model.param("stem.weight").grad();
  EXPECT_TRUE(std::any_of(grad.begin(), grad.end(), [](double v) { return v != 0; }));
  // Spot check one coordinate against a central difference.
  Tensor stem = model.param("stem.weight");
  const double eps = 1e-6, saved = stem.values()[0];
  auto loss = [&] {
    Graph f(GradMode::kDisabled);
    return f.CrossEntropy(model.Forward(f, batch), labels).item();
  };
  stem.mutable_values()[0] = saved + eps;
  const double plus = loss();
  stem.mutable_values()[0] = saved - eps;
  const double minus = loss();
  stem.mutable_values()[0] = saved;
  EXPECT_NEAR(grad[0], (plus - minus) / (2 * eps), 1e-6);
}

TEST(Patchify, FullResolution256) {
  Graph g;
  const Tensor patches = Patchify(g, Tensor::Zeros({1, 256, 256}), 16);
  EXPECT_EQ(patches.shape(), (Shape{256, 256}));
}

TEST(Patchify, UnitPatchesAreRowMajorPixels) {
  Graph g;
  const Tensor patches = Patchify(g, Tensor::FromValues({1, 2, 2}, {1, 2, 3, 4}), 1);
  EXPECT_EQ(patches.shape(), (Shape{4, 1}));
  EXPECT_EQ(Values(patches), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Patchify, WholeImagePatch) {
  Rng rng(7);
  const Tensor image = RandomTensor({1, 4, 4}, rng);
  Graph g;
  const Tensor patches = Patchify(g, image, 4);
  EXPECT_EQ(patches.shape(), (Shape{1, 16}));
  EXPECT_EQ(Values(patches), Values(image));
}

TEST(Patchify, PatchContentsAndOrder) {
  Graph g;
  std::vector<double> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i);
  const Tensor patches = Patchify(g, Tensor::FromValues({1, 4, 4}, v), 2);
  EXPECT_EQ(Values(patches), (std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9,
                                                  12, 13, 10, 11, 14, 15}));
}

TEST(Patchify, IndivisibleThrows) {
  Graph g;
  EXPECT_THROW(Patchify(g, Tensor::Zeros({1, 6, 6}), 4), ShapeError);
}

TEST(Patchify, RoundTripForDivisibleSizes) {
  Rng rng(8);
  for (std::size_t h = 1; h <= 64; ++h) {
    for (std::size_t p = 1; p <= h; ++p) {
      if (h % p != 0) continue;
      const std::size_t w = (h % 3 == 0) ? p : h;
      const Tensor image = RandomTensor({1, h, w}, rng);
      Graph g(GradMode::kDisabled);
      EXPECT_EQ(Values(Unpatchify(Patchify(g, image, p), h, w, p)), Values(image))
          << h << "x" << w << " patch " << p;
    }
  }
}

TEST(PatchEmbed, ZeroProjectionGivesPositions) {
  Rng rng(9);
  const PatchEmbedParams p{Tensor::Zeros({4, 3}), RandomTensor({5, 3}, rng)};
  Graph g;
  EXPECT_EQ(Values(PatchEmbedAndPosition(g, RandomTensor({5, 4}, rng), p)),
            Values(p.positions));
}

TEST(PatchEmbed, IdentityProjectionGivesPatches) {
  Rng rng(10);
  std::vector<double> eye(16, 0.0);
  for (std::size_t i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  const PatchEmbedParams p{Tensor::FromValues({4, 4}, eye), Tensor::Zeros({3, 4})};
  const Tensor patches = RandomTensor({3, 4}, rng);
  Graph g;
  EXPECT_EQ(Values(PatchEmbedAndPosition(g, patches, p)), Values(patches));
}

TEST(PatchEmbed, MatchesMatmulPlusAddOracle) {
  Rng rng(11);
  const PatchEmbedParams p{RandomTensor({4, 3}, rng), RandomTensor({5, 3}, rng)};
  const Tensor patches = RandomTensor({5, 4}, rng);
  std::vector<double> expected(15);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        s += patches.values()[r * 4 + k] * p.projection.values()[k * 3 + c];
      }
      expected[r * 3 + c] = s + p.positions.values()[r * 3 + c];
    }
  }
  Graph g;
  EXPECT_EQ(Values(PatchEmbedAndPosition(g, patches, p)), expected);
}

TEST(PatchEmbed, PositionLengthMismatchThrows) {
  const PatchEmbedParams p{Tensor::Zeros({4, 3}), Tensor::Zeros({6, 3})};
  Graph g;
  EXPECT_THROW(PatchEmbedAndPosition(g, Tensor::Zeros({5, 4}), p), ShapeError);
}

TEST(Attention, SingleTokenWeightIsOne) {
  Rng rng(12);
  const auto p = RandomAttention(4, 6, 2, rng);
  std::vector<Tensor> weights;
  Graph g;
  AttentionBlock(g, RandomTensor({1, 4}, rng), p, &weights);
  ASSERT_EQ(weights.size(), 2u);
  for (const Tensor& w : weights) EXPECT_EQ(Values(w), (std::vector<double>{1.0}));
}

TEST(Attention, IdenticalTokensAttendUniformly) {
  Rng rng(13);
  const auto p = RandomAttention(4, 6, 2, rng);
  const Tensor token = RandomTensor({1, 4}, rng);
  std::vector<double> rows;
  for (int i = 0; i < 5; ++i) rows.insert(rows.end(), token.values().begin(), token.values().end());
  std::vector<Tensor> weights;
  Graph g;
  AttentionBlock(g, Tensor::FromValues({5, 4}, rows), p, &weights);
  for (const Tensor& w : weights) {
    for (double v : w.values()) EXPECT_NEAR(v, 0.2, 1e-15);
  }
}

TEST(Attention, MatchesExplicitLoopOracle) {
  for (std::size_t heads : {1u, 2u}) {
    Rng rng(14 + heads);
    const auto p = RandomAttention(4, 5, heads, rng);
    const Tensor x = RandomTensor({3, 4}, rng);
    std::vector<Tensor> weights;
    std::vector<std::vector<double>> expected_weights;
    Graph g;
    const Tensor y = AttentionBlock(g, x, p, &weights);
    const std::vector<double> expected =
        testing::ExplicitAttentionBlock(Values(x), 3, 4, p, &expected_weights);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_NEAR(y.values()[i], expected[i], 1e-12);
    }
    ASSERT_EQ(weights.size(), heads);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < 9; ++i) {
        EXPECT_NEAR(weights[h].values()[i], expected_weights[h][i], 1e-12);
      }
    }
  }
}

TEST(Attention, HeadsMustDivideWidth) {
  Rng rng(16);
  const auto p = RandomAttention(4, 4, 3, rng);
  Graph g;
  EXPECT_THROW(AttentionBlock(g, Tensor::Zeros({2, 4}), p), ShapeError);
}

TEST(ViT, AttentionRowsSumToOneAtEveryLayer) {
  const ModelSpec spec = SpecOf(ModelKind::kViT, 8);
  const Model model = BuildModel(spec);
  Rng rng(17);
  for (const NamedParam& p : model.params()) {
    for (double& v : p.value.mutable_values()) v = rng.Uniform(-1, 1);
  }
  ForwardTrace trace;
  Graph g;
  const Tensor logits = model.Forward(g, RandomTensor({2, 1, 8, 8}, rng, 0, 1), &trace);
  EXPECT_EQ(logits.shape(), (Shape{2, 5}));
  ASSERT_EQ(trace.attention.size(), 2u * 2u * 2u);
  for (const Tensor& w : trace.attention) {
    ASSERT_EQ(w.shape(), (Shape{4, 4}));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_GE(w.values()[r * 4 + c], 0.0);
        s += w.values()[r * 4 + c];
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Models, FullLossGradientsAtToySize) {
  for (ModelKind kind : {ModelKind::kBasicCnn, ModelKind::kResNetStyle,
                         ModelKind::kViT, ModelKind::kProposedEnsemble}) {
    const auto r = testing::ModelGradSuite(kind, 3);
    EXPECT_LT(r.max_error, 1e-4) << r.worst;
  }
}

Model EnsembleOf(const Model& resnet, const Model& vit) {
  ModelSpec spec;
  spec.kind = ModelKind::kProposedEnsemble;
  spec.input_side = resnet.spec().input_side;
  return BuildProposed(spec, resnet, vit);
}

// Forces a model's output to fixed logits by zeroing the head weights.
void ForceLogits(const Model& model, const std::vector<double>& logits) {
  const bool vit = model.spec().kind == ModelKind::kViT;
  Fill(model.param(vit ? "head.weight" : "dense.weight"), 0.0);
  const Tensor& bias = model.param(vit ? "head.bias" : "dense.bias");
  std::copy(logits.begin(), logits.end(), bias.mutable_values().begin());
}

std::vector<double> Probabilities(const Model& model, const Tensor& batch) {
  Graph g(GradMode::kDisabled);
  return Values(g.Softmax(model.Forward(g, batch)));
}

TEST(Proposed, IdenticalMembersGiveSameProbabilities) {
  const Model resnet = BuildModel(SpecOf(ModelKind::kResNetStyle, 8));
  const Model vit = BuildModel(SpecOf(ModelKind::kViT, 8));
  ForceLogits(resnet, {0.3, -1, 2, 0, 0.5});
  ForceLogits(vit, {0.3, -1, 2, 0, 0.5});
  const Tensor batch = Tensor::Full({2, 1, 8, 8}, 0.5);
  const auto member = Probabilities(resnet, batch);
  const auto ensemble = Probabilities(EnsembleOf(resnet, vit), batch);
  for (std::size_t i = 0; i < member.size(); ++i) {
    EXPECT_NEAR(ensemble[i], member[i], 1e-15);
  }
}

TEST(Proposed, OneHotMembersAverage) {
  const Model resnet = BuildModel(SpecOf(ModelKind::kResNetStyle, 8));
  const Model vit = BuildModel(SpecOf(ModelKind::kViT, 8));
  ForceLogits(resnet, {1000, 0, 0, 0, 0});
  ForceLogits(vit, {0, 1000, 0, 0, 0});
  const auto p = Probabilities(EnsembleOf(resnet, vit), Tensor::Full({1, 1, 8, 8}, 0.5));
  const std::vector<double> expected = {0.5, 0.5, 0, 0, 0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(p[i], expected[i], 1e-12);
}

TEST(Proposed, MatchesAverageOfSoftmaxOracle) {
  const Model model = BuildModel(SpecOf(ModelKind::kProposedEnsemble, 8));
  Rng rng(18);
  const Tensor batch = RandomTensor({3, 1, 8, 8}, rng, 0, 1);
  Graph g(GradMode::kDisabled);
  const auto a = Values(model.members()[0].Forward(g, batch));
  const auto b = Values(model.members()[1].Forward(g, batch));
  const auto expected = testing::AverageOfSoftmax(a, b, 3, 5);
  const Tensor logits = model.Forward(g, batch);
  const auto p = Values(g.Softmax(logits));
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(p[i], expected[i], 1e-12);
    EXPECT_NEAR(std::exp(logits.values()[i]), expected[i], 1e-12);
  }
  for (std::size_t r = 0; r < 3; ++r) {
    const auto row = expected.begin() + static_cast<long>(r * 5);
    const auto lrow = logits.values().begin() + static_cast<long>(r * 5);
    EXPECT_EQ(std::max_element(row, row + 5) - row,
              std::max_element(lrow, lrow + 5) - lrow);
  }
}

TEST(Proposed, ClassCountMismatchThrows) {
  ModelSpec rs = SpecOf(ModelKind::kResNetStyle, 8);
  rs.num_classes = 4;
  EXPECT_THROW(EnsembleOf(BuildModel(rs), BuildModel(SpecOf(ModelKind::kViT, 8))),
               ArgumentError);
}

TEST(ModelFile, RoundTripIsBitwise) {
  const fs::path dir = TempDir("roundtrip");
  for (ModelKind kind : {ModelKind::kBasicCnn, ModelKind::kResNetStyle, ModelKind::kViT,
                         ModelKind::kProposedEnsemble}) {
    const ModelSpec spec = SpecOf(kind, 8);
    const Model model = BuildModel(spec);
    Rng rng(19);
    for (const NamedParam& p : model.params()) {
      for (double& v : p.value.mutable_values()) v = rng.Normal() * 1e3;
    }
    const fs::path path = dir / "m.lbm";
    SaveModel(model, path);
    const Model loaded = LoadModel(path, spec);
    ASSERT_EQ(loaded.params().size(), model.params().size());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      EXPECT_EQ(loaded.params()[i].name, model.params()[i].name);
      EXPECT_EQ(Values(loaded.params()[i].value), Values(model.params()[i].value));
    }
  }
}

ModelFileErrorKind LoadErrorKind(const fs::path& path, const ModelSpec& spec) {
  try {
    LoadModel(path, spec);
  } catch (const ModelFileError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "load of " << path << " did not throw";
  return ModelFileErrorKind::kIo;
}

TEST(ModelFile, DistinctErrors) {
  const fs::path dir = TempDir("errors");
  const ModelSpec spec = SpecOf(ModelKind::kBasicCnn, 8);
  const Model model = BuildModel(spec);
  std::ofstream(dir / "empty.lbm").close();
  EXPECT_EQ(LoadErrorKind(dir / "empty.lbm", spec), ModelFileErrorKind::kTruncated);

  SaveModel(model, dir / "good.lbm");
  std::string bytes;
  {
    std::ifstream in(dir / "good.lbm", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::string flipped = bytes;
  flipped[0] = static_cast<char>(~flipped[0]);
  std::ofstream(dir / "magic.lbm", std::ios::binary) << flipped;
  EXPECT_EQ(LoadErrorKind(dir / "magic.lbm", spec), ModelFileErrorKind::kVersion);

  std::ofstream(dir / "short.lbm", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_EQ(LoadErrorKind(dir / "short.lbm", spec), ModelFileErrorKind::kTruncated);

  std::vector<NamedParam> renamed(model.params().begin(), model.params().end());
  renamed[0].name = "conv9.weight";
  WriteParameterFile(dir / "renamed.lbm", renamed);
  EXPECT_EQ(LoadErrorKind(dir / "renamed.lbm", spec),
            ModelFileErrorKind::kUnknownParameter);

  EXPECT_EQ(LoadErrorKind(dir / "absent.lbm", spec), ModelFileErrorKind::kIo);
}

TEST(ModelSpec, JsonRoundTrip) {
  const ModelSpec spec = SpecOf(ModelKind::kProposedEnsemble, 8);
  const ModelSpec back = ModelSpecFromJson(ModelSpecToJson(spec));
  EXPECT_EQ(ModelSpecToJson(back), ModelSpecToJson(spec));
}

}  // namespace
}  // namespace lungbench
