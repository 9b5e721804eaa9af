#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lungbench/graph.h"
#include "lungbench/tensor.h"

namespace lungbench {

enum class ModelKind { kBasicCnn, kResNetStyle, kViT, kProposedEnsemble };

std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

// Declarative architecture description. Only the fields of the selected kind
// are used. All convolutions are 3x3 with padding 1.
struct ModelSpec {
  ModelKind kind = ModelKind::kBasicCnn;
  int input_side = 32;
  int num_classes = 5;
  std::uint64_t init_seed = 0;

  // Every kind first maps pixels to (x - input_mean) / input_std.
  double input_mean = 0.45;
  double input_std = 0.15;

  // BasicCnn: four conv widths.
  std::vector<int> cnn_widths = {4, 4, 8, 8};

  // ResNetStyle.
  int resnet_width = 8;
  int resnet_blocks = 3;
  int resnet_stem_stride = 2;

  // ViT.
  int patch_size = 4;
  int embed_dim = 16;
  int num_heads = 2;
  int mlp_dim = 32;
  int num_layers = 2;

  // ProposedEnsemble: {resnet_style spec, vit spec}.
  std::vector<ModelSpec> members;

  // Throws ArgumentError on an invalid combination.
  void Validate() const;
};

nlohmann::json ModelSpecToJson(const ModelSpec& spec);
ModelSpec ModelSpecFromJson(const nlohmann::json& j);

struct NamedParam {
  std::string name;
  Tensor value;
};

// Attention weights captured during a forward pass: one [T x T] matrix per
// (sample, layer, head), in that nesting order.
struct ForwardTrace {
  std::vector<Tensor> attention;
};

// A realized architecture: a spec plus its ordered, uniquely named
// parameters. Copies share parameter storage; use Clone() for snapshots.
class Model {
 public:
  Model(ModelSpec spec, std::vector<NamedParam> params,
        std::vector<Model> members = {});

  const ModelSpec& spec() const { return spec_; }
  std::span<const NamedParam> params() const { return params_; }
  std::vector<Tensor> parameters() const;
  // Throws ArgumentError when absent.
  const Tensor& param(std::string_view name) const;
  bool has_param(std::string_view name) const;
  std::size_t num_parameters() const;

  // batch [N x 1 x S x S] -> logits [N x num_classes].
  Tensor Forward(Graph& graph, const Tensor& batch,
                 ForwardTrace* trace = nullptr) const;

  void ZeroGrad();
  Model Clone() const;
  // Overwrites this model's parameter values with other's (same layout).
  void CopyValuesFrom(const Model& other);

  std::span<const Model> members() const { return members_; }

 private:
  Tensor ForwardBasicCnn(Graph& graph, const Tensor& batch) const;
  Tensor ForwardResNet(Graph& graph, const Tensor& batch) const;
  Tensor ForwardViT(Graph& graph, const Tensor& batch,
                    ForwardTrace* trace) const;
  Tensor ForwardEnsemble(Graph& graph, const Tensor& batch,
                         ForwardTrace* trace) const;

  ModelSpec spec_;
  std::vector<NamedParam> params_;
  std::vector<Model> members_;
};

// conv-relu, conv-relu, pool, conv-relu, conv-relu, pool, flatten, dense.
Model BuildBasicCnn(const ModelSpec& spec);
// stem conv-relu (strided), K residual blocks, global average pool, dense.
Model BuildResNetStyle(const ModelSpec& spec);
// patchify, embed + position, L attention blocks, token mean pool, dense.
Model BuildViT(const ModelSpec& spec);
// Averages the softmax outputs of the two members and returns the log of
// the average as logits.
Model BuildProposed(const ModelSpec& spec, Model resnet, Model vit);
// Dispatches on spec.kind; ensembles are built from spec.members.
Model BuildModel(const ModelSpec& spec);

// Closed-form parameter counts.
std::size_t BasicCnnParameterCount(const ModelSpec& spec);

struct ResidualBlockParams {
  Tensor conv1_weight, conv1_bias;
  Tensor conv2_weight, conv2_bias;
};

// relu(conv2(relu(conv1(x))) + x), 3x3 convolutions, stride 1, padding 1.
Tensor ResidualBlock(Graph& graph, const Tensor& x,
                     const ResidualBlockParams& params);

// image [1 x H x W] -> [num_patches x patch_size^2], patches row-major.
Tensor Patchify(Graph& graph, const Tensor& image, std::size_t patch_size);
// Inverse of Patchify for a height x width image.
Tensor Unpatchify(const Tensor& patches, std::size_t height, std::size_t width,
                  std::size_t patch_size);

struct PatchEmbedParams {
  Tensor projection;  // [patch_dim x embed_dim]
  Tensor positions;   // [num_patches x embed_dim]
};

// patches * projection + positions.
Tensor PatchEmbedAndPosition(Graph& graph, const Tensor& patches,
                             const PatchEmbedParams& params);

struct AttentionBlockParams {
  std::size_t num_heads = 1;
  Tensor ln1_gamma, ln1_beta;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_gamma, ln2_beta;
  Tensor w1, b1, w2, b2;
};

inline constexpr double kLayerNormEps = 1e-5;

// Pre-norm transformer block: y = x + MHSA(LN(x)); out = y + FFN(LN(y)).
// When attention is non-null, the per-head weight matrices are appended.
Tensor AttentionBlock(Graph& graph, const Tensor& x,
                      const AttentionBlockParams& params,
                      std::vector<Tensor>* attention = nullptr);

}  // namespace lungbench
