#include "lungbench/models.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "lungbench/error.h"
#include "lungbench/random.h"

namespace lungbench {
namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kPadding = 1;

class ParamBuilder {
 public:
  explicit ParamBuilder(std::uint64_t seed) : rng_(seed) {}

  Tensor Glorot(std::string name, Shape shape, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> values(ShapeNumel(shape));
    for (double& v : values) v = rng_.Uniform(-a, a);
    return Add(std::move(name),
               Tensor::FromValues(std::move(shape), std::move(values), true));
  }
  Tensor Conv(std::string name, std::size_t cout, std::size_t cin) {
    const double k2 = static_cast<double>(kKernel * kKernel);
    return Glorot(std::move(name), {cout, cin, kKernel, kKernel},
                  static_cast<double>(cin) * k2,
                  static_cast<double>(cout) * k2);
  }
  Tensor Linear(std::string name, std::size_t in, std::size_t out) {
    return Glorot(std::move(name), {in, out}, static_cast<double>(in),
                  static_cast<double>(out));
  }
  Tensor Constant(std::string name, Shape shape, double value) {
    return Add(std::move(name), Tensor::Full(std::move(shape), value, true));
  }

  std::vector<NamedParam> Take() { return std::move(params_); }

 private:
  Tensor Add(std::string name, Tensor t) {
    params_.push_back(NamedParam{std::move(name), t});
    return t;
  }

  Rng rng_;
  std::vector<NamedParam> params_;
};

void RequireKind(const ModelSpec& spec, ModelKind kind) {
  if (spec.kind != kind) {
    throw ArgumentError("expected a " + std::string(ModelKindName(kind)) +
                        " spec, got " + std::string(ModelKindName(spec.kind)));
  }
  spec.Validate();
}

std::size_t Side(const ModelSpec& spec) {
  return static_cast<std::size_t>(spec.input_side);
}

void CheckBatch(const ModelSpec& spec, const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(1) != 1) {
    throw ShapeError("forward: expected a batch [N x 1 x H x W], got " +
                     ShapeToString(batch.shape()));
  }
  if (batch.dim(2) != batch.dim(3)) {
    throw ShapeError("forward: images must be square, got " +
                     ShapeToString(batch.shape()));
  }
  if (batch.dim(2) != Side(spec)) {
    throw ShapeError("forward: model expects side " +
                     std::to_string(spec.input_side) + ", got " +
                     ShapeToString(batch.shape()));
  }
}

std::string LayerName(std::size_t layer, const char* suffix) {
  return "layer" + std::to_string(layer) + "." + suffix;
}

}  // namespace

std::string_view ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBasicCnn:
      return "BasicCnn";
    case ModelKind::kResNetStyle:
      return "ResNetStyle";
    case ModelKind::kViT:
      return "ViT";
    case ModelKind::kProposedEnsemble:
      return "ProposedEnsemble";
  }
  return "unknown";
}

ModelKind ParseModelKind(std::string_view name) {
  for (ModelKind k : {ModelKind::kBasicCnn, ModelKind::kResNetStyle,
                      ModelKind::kViT, ModelKind::kProposedEnsemble}) {
    if (ModelKindName(k) == name) return k;
  }
  throw ArgumentError("unknown model kind '" + std::string(name) + "'");
}

void ModelSpec::Validate() const {
  if (input_side <= 0) {
    throw ArgumentError("input_side must be positive, got " +
                        std::to_string(input_side));
  }
  if (num_classes < 2) {
    throw ArgumentError("num_classes must be at least 2, got " +
                        std::to_string(num_classes));
  }
  if (!(input_std > 0.0) || !std::isfinite(input_mean)) {
    throw ArgumentError("input_std must be positive and input_mean finite");
  }
  switch (kind) {
    case ModelKind::kBasicCnn:
      if (cnn_widths.size() != 4 ||
          std::any_of(cnn_widths.begin(), cnn_widths.end(),
                      [](int w) { return w <= 0; })) {
        throw ArgumentError("BasicCnn needs four positive conv widths");
      }
      if (input_side < 4) {
        throw ArgumentError("BasicCnn needs input_side >= 4 for two pools");
      }
      break;
    case ModelKind::kResNetStyle:
      if (resnet_width <= 0 || resnet_blocks < 0 || resnet_stem_stride <= 0) {
        throw ArgumentError(
            "ResNetStyle needs width > 0, blocks >= 0 and stem stride > 0");
      }
      break;
    case ModelKind::kViT:
      if (patch_size <= 0 || embed_dim <= 0 || num_heads <= 0 ||
          mlp_dim <= 0 || num_layers < 0) {
        throw ArgumentError("ViT hyperparameters must be positive");
      }
      if (input_side % patch_size != 0) {
        throw ArgumentError("ViT input_side " + std::to_string(input_side) +
                            " not divisible by patch_size " +
                            std::to_string(patch_size));
      }
      if (embed_dim % num_heads != 0) {
        throw ArgumentError("ViT embed_dim " + std::to_string(embed_dim) +
                            " not divisible by num_heads " +
                            std::to_string(num_heads));
      }
      break;
    case ModelKind::kProposedEnsemble:
      if (members.size() != 2 ||
          members[0].kind != ModelKind::kResNetStyle ||
          members[1].kind != ModelKind::kViT) {
        throw ArgumentError(
            "ProposedEnsemble needs members {ResNetStyle, ViT}");
      }
      for (const ModelSpec& m : members) {
        if (m.num_classes != num_classes) {
          throw ArgumentError("ensemble member has " +
                              std::to_string(m.num_classes) +
                              " classes, ensemble has " +
                              std::to_string(num_classes));
        }
        if (m.input_side != input_side) {
          throw ArgumentError("ensemble member input_side mismatch");
        }
        m.Validate();
      }
      break;
  }
}

nlohmann::json ModelSpecToJson(const ModelSpec& spec) {
  nlohmann::json j;
  j["kind"] = ModelKindName(spec.kind);
  j["input_side"] = spec.input_side;
  j["num_classes"] = spec.num_classes;
  j["init_seed"] = spec.init_seed;
  j["input_mean"] = spec.input_mean;
  j["input_std"] = spec.input_std;
  switch (spec.kind) {
    case ModelKind::kBasicCnn:
      j["cnn_widths"] = spec.cnn_widths;
      break;
    case ModelKind::kResNetStyle:
      j["resnet_width"] = spec.resnet_width;
      j["resnet_blocks"] = spec.resnet_blocks;
      j["resnet_stem_stride"] = spec.resnet_stem_stride;
      break;
    case ModelKind::kViT:
      j["patch_size"] = spec.patch_size;
      j["embed_dim"] = spec.embed_dim;
      j["num_heads"] = spec.num_heads;
      j["mlp_dim"] = spec.mlp_dim;
      j["num_layers"] = spec.num_layers;
      break;
    case ModelKind::kProposedEnsemble: {
      nlohmann::json members = nlohmann::json::array();
      for (const ModelSpec& m : spec.members) {
        members.push_back(ModelSpecToJson(m));
      }
      j["members"] = members;
      break;
    }
  }
  return j;
}

ModelSpec ModelSpecFromJson(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    spec.kind = ParseModelKind(j.at("kind").get<std::string>());
    spec.input_side = j.at("input_side").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.init_seed = j.value("init_seed", std::uint64_t{0});
    spec.cnn_widths = j.value("cnn_widths", spec.cnn_widths);
    spec.resnet_width = j.value("resnet_width", spec.resnet_width);
    spec.resnet_blocks = j.value("resnet_blocks", spec.resnet_blocks);
    spec.resnet_stem_stride =
        j.value("resnet_stem_stride", spec.resnet_stem_stride);
    spec.input_mean = j.value("input_mean", spec.input_mean);
    spec.input_std = j.value("input_std", spec.input_std);
    spec.patch_size = j.value("patch_size", spec.patch_size);
    spec.embed_dim = j.value("embed_dim", spec.embed_dim);
    spec.num_heads = j.value("num_heads", spec.num_heads);
    spec.mlp_dim = j.value("mlp_dim", spec.mlp_dim);
    spec.num_layers = j.value("num_layers", spec.num_layers);
    if (j.contains("members")) {
      for (const auto& m : j.at("members")) {
        spec.members.push_back(ModelSpecFromJson(m));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed model spec: ") + e.what());
  }
  spec.Validate();
  return spec;
}

Model::Model(ModelSpec spec, std::vector<NamedParam> params,
             std::vector<Model> members)
    : spec_(std::move(spec)),
      params_(std::move(params)),
      members_(std::move(members)) {
  std::set<std::string_view> seen;
  for (const NamedParam& p : params_) {
    if (!seen.insert(p.name).second) {
      throw ArgumentError("duplicate parameter name '" + p.name + "'");
    }
  }
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const NamedParam& p : params_) out.push_back(p.value);
  return out;
}

const Tensor& Model::param(std::string_view name) const {
  for (const NamedParam& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ArgumentError("model has no parameter '" + std::string(name) + "'");
}

bool Model::has_param(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const NamedParam& p) { return p.name == name; });
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  for (const NamedParam& p : params_) n += p.value.size();
  return n;
}

void Model::ZeroGrad() {
  for (NamedParam& p : params_) p.value.ZeroGrad();
}

Model Model::Clone() const {
  std::vector<Model> members;
  for (const Model& m : members_) members.push_back(m.Clone());
  std::vector<NamedParam> params;
  if (members.empty()) {
    for (const NamedParam& p : params_) {
      params.push_back(NamedParam{p.name, p.value.Clone()});
    }
  } else {
    // Ensemble parameters alias member parameters; rebuild the aliasing.
    const char* prefixes[] = {"resnet.", "vit."};
    for (std::size_t m = 0; m < members.size(); ++m) {
      for (const NamedParam& p : members[m].params()) {
        params.push_back(NamedParam{prefixes[m] + p.name, p.value});
      }
    }
  }
  return Model(spec_, std::move(params), std::move(members));
}

void Model::CopyValuesFrom(const Model& other) {
  if (other.params_.size() != params_.size()) {
    throw ArgumentError("CopyValuesFrom: parameter layouts differ");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const NamedParam& src = other.params_[i];
    NamedParam& dst = params_[i];
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw ArgumentError("CopyValuesFrom: parameter '" + dst.name +
                          "' does not match '" + src.name + "'");
    }
    std::copy(src.value.values().begin(), src.value.values().end(),
              dst.value.mutable_values().begin());
  }
}

Tensor Model::Forward(Graph& graph, const Tensor& batch,
                      ForwardTrace* trace) const {
  CheckBatch(spec_, batch);
  if (spec_.kind == ModelKind::kProposedEnsemble) {
    return ForwardEnsemble(graph, batch, trace);
  }
  const Tensor x = graph.MulScalar(
      graph.Add(batch, Tensor::Full(batch.shape(), -spec_.input_mean)),
      1.0 / spec_.input_std);
  switch (spec_.kind) {
    case ModelKind::kBasicCnn:
      return ForwardBasicCnn(graph, x);
    case ModelKind::kResNetStyle:
      return ForwardResNet(graph, x);
    case ModelKind::kViT:
      return ForwardViT(graph, x, trace);
    case ModelKind::kProposedEnsemble:
      break;
  }
  throw ArgumentError("unknown model kind");
}

Tensor Model::ForwardBasicCnn(Graph& graph, const Tensor& batch) const {
  const std::size_t n = batch.dim(0);
  std::vector<Tensor> features;
  features.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x = graph.Select(batch, i);
    for (int layer = 0; layer < 4; ++layer) {
      const std::string base = "conv" + std::to_string(layer + 1);
      x = graph.Relu(graph.Conv2d(x, param(base + ".weight"),
                                  param(base + ".bias"), 1, kPadding));
      if (layer == 1 || layer == 3) x = graph.MaxPool2d(x, 2, 2);
    }
    features.push_back(graph.Reshape(x, {1, x.size()}));
  }
  Tensor flat = graph.ConcatRows(features);
  return graph.AddRow(graph.MatMul(flat, param("dense.weight")),
                      param("dense.bias"));
}

Tensor Model::ForwardResNet(Graph& graph, const Tensor& batch) const {
  const std::size_t n = batch.dim(0);
  const std::size_t width = static_cast<std::size_t>(spec_.resnet_width);
  std::vector<Tensor> features;
  features.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x = graph.Select(batch, i);
    x = graph.Relu(graph.Conv2d(
        x, param("stem.weight"), param("stem.bias"),
        static_cast<std::size_t>(spec_.resnet_stem_stride), kPadding));
    for (int b = 0; b < spec_.resnet_blocks; ++b) {
      const std::string base = "block" + std::to_string(b);
      ResidualBlockParams block{
          param(base + ".conv1.weight"), param(base + ".conv1.bias"),
          param(base + ".conv2.weight"), param(base + ".conv2.bias")};
      x = ResidualBlock(graph, x, block);
    }
    const std::size_t hw = x.size() / width;
    Tensor cols = graph.Transpose(graph.Reshape(x, {width, hw}));
    features.push_back(graph.MeanRows(cols));
  }
  Tensor pooled = graph.ConcatRows(features);
  return graph.AddRow(graph.MatMul(pooled, param("dense.weight")),
                      param("dense.bias"));
}

Tensor Model::ForwardViT(Graph& graph, const Tensor& batch,
                         ForwardTrace* trace) const {
  const std::size_t n = batch.dim(0);
  const PatchEmbedParams embed{param("embed.projection"),
                               param("embed.positions")};
  std::vector<AttentionBlockParams> layers;
  for (int l = 0; l < spec_.num_layers; ++l) {
    const auto L = static_cast<std::size_t>(l);
    AttentionBlockParams p;
    p.num_heads = static_cast<std::size_t>(spec_.num_heads);
    p.ln1_gamma = param(LayerName(L, "ln1.gamma"));
    p.ln1_beta = param(LayerName(L, "ln1.beta"));
    p.wq = param(LayerName(L, "attn.wq"));
    p.bq = param(LayerName(L, "attn.bq"));
    p.wk = param(LayerName(L, "attn.wk"));
    p.bk = param(LayerName(L, "attn.bk"));
    p.wv = param(LayerName(L, "attn.wv"));
    p.bv = param(LayerName(L, "attn.bv"));
    p.wo = param(LayerName(L, "attn.wo"));
    p.bo = param(LayerName(L, "attn.bo"));
    p.ln2_gamma = param(LayerName(L, "ln2.gamma"));
    p.ln2_beta = param(LayerName(L, "ln2.beta"));
    p.w1 = param(LayerName(L, "mlp.w1"));
    p.b1 = param(LayerName(L, "mlp.b1"));
    p.w2 = param(LayerName(L, "mlp.w2"));
    p.b2 = param(LayerName(L, "mlp.b2"));
    layers.push_back(std::move(p));
  }
  std::vector<Tensor> features;
  features.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor image = graph.Select(batch, i);
    Tensor tokens = PatchEmbedAndPosition(
        graph,
        Patchify(graph, image, static_cast<std::size_t>(spec_.patch_size)),
        embed);
    for (const AttentionBlockParams& p : layers) {
      tokens = AttentionBlock(graph, tokens, p,
                              trace ? &trace->attention : nullptr);
    }
    features.push_back(graph.MeanRows(tokens));
  }
  Tensor pooled = graph.ConcatRows(features);
  return graph.AddRow(graph.MatMul(pooled, param("head.weight")),
                      param("head.bias"));
}

Tensor Model::ForwardEnsemble(Graph& graph, const Tensor& batch,
                              ForwardTrace* trace) const {
  Tensor p0 = graph.Softmax(members_[0].Forward(graph, batch, trace));
  Tensor p1 = graph.Softmax(members_[1].Forward(graph, batch, trace));
  return graph.Log(graph.MulScalar(graph.Add(p0, p1), 0.5));
}

std::size_t BasicCnnParameterCount(const ModelSpec& spec) {
  const auto& w = spec.cnn_widths;
  std::size_t count = 0;
  std::size_t cin = 1;
  for (int width : w) {
    const auto cout = static_cast<std::size_t>(width);
    count += cout * cin * kKernel * kKernel + cout;
    cin = cout;
  }
  std::size_t side = Side(spec);
  side = (side - 2) / 2 + 1;
  side = (side - 2) / 2 + 1;
  const std::size_t features = cin * side * side;
  const auto classes = static_cast<std::size_t>(spec.num_classes);
  return count + features * classes + classes;
}

Model BuildBasicCnn(const ModelSpec& spec) {
  RequireKind(spec, ModelKind::kBasicCnn);
  ParamBuilder b(spec.init_seed);
  std::size_t cin = 1;
  std::size_t side = Side(spec);
  for (int layer = 0; layer < 4; ++layer) {
    const auto cout = static_cast<std::size_t>(spec.cnn_widths[layer]);
    const std::string base = "conv" + std::to_string(layer + 1);
    b.Conv(base + ".weight", cout, cin);
    b.Constant(base + ".bias", {cout}, 0.0);
    cin = cout;
    if (layer == 1 || layer == 3) side = (side - 2) / 2 + 1;
  }
  const std::size_t features = cin * side * side;
  const auto classes = static_cast<std::size_t>(spec.num_classes);
  b.Linear("dense.weight", features, classes);
  b.Constant("dense.bias", {classes}, 0.0);
  return Model(spec, b.Take());
}

Model BuildResNetStyle(const ModelSpec& spec) {
  RequireKind(spec, ModelKind::kResNetStyle);
  ParamBuilder b(spec.init_seed);
  const auto width = static_cast<std::size_t>(spec.resnet_width);
  b.Conv("stem.weight", width, 1);
  b.Constant("stem.bias", {width}, 0.0);
  for (int blk = 0; blk < spec.resnet_blocks; ++blk) {
    const std::string base = "block" + std::to_string(blk);
    b.Conv(base + ".conv1.weight", width, width);
    b.Constant(base + ".conv1.bias", {width}, 0.0);
    b.Conv(base + ".conv2.weight", width, width);
    b.Constant(base + ".conv2.bias", {width}, 0.0);
  }
  const auto classes = static_cast<std::size_t>(spec.num_classes);
  b.Linear("dense.weight", width, classes);
  b.Constant("dense.bias", {classes}, 0.0);
  return Model(spec, b.Take());
}

Model BuildViT(const ModelSpec& spec) {
  RequireKind(spec, ModelKind::kViT);
  ParamBuilder b(spec.init_seed);
  const auto patch = static_cast<std::size_t>(spec.patch_size);
  const std::size_t patch_dim = patch * patch;
  const std::size_t tokens = (Side(spec) / patch) * (Side(spec) / patch);
  const auto d = static_cast<std::size_t>(spec.embed_dim);
  const auto mlp = static_cast<std::size_t>(spec.mlp_dim);
  b.Linear("embed.projection", patch_dim, d);
  b.Constant("embed.positions", {tokens, d}, 0.0);
  for (int l = 0; l < spec.num_layers; ++l) {
    const auto L = static_cast<std::size_t>(l);
    b.Constant(LayerName(L, "ln1.gamma"), {d}, 1.0);
    b.Constant(LayerName(L, "ln1.beta"), {d}, 0.0);
    for (const char* m : {"q", "k", "v", "o"}) {
      b.Linear(LayerName(L, (std::string("attn.w") + m).c_str()), d, d);
      b.Constant(LayerName(L, (std::string("attn.b") + m).c_str()), {d}, 0.0);
    }
    b.Constant(LayerName(L, "ln2.gamma"), {d}, 1.0);
    b.Constant(LayerName(L, "ln2.beta"), {d}, 0.0);
    b.Linear(LayerName(L, "mlp.w1"), d, mlp);
    b.Constant(LayerName(L, "mlp.b1"), {mlp}, 0.0);
    b.Linear(LayerName(L, "mlp.w2"), mlp, d);
    b.Constant(LayerName(L, "mlp.b2"), {d}, 0.0);
  }
  const auto classes = static_cast<std::size_t>(spec.num_classes);
  b.Linear("head.weight", d, classes);
  b.Constant("head.bias", {classes}, 0.0);
  return Model(spec, b.Take());
}

Model BuildProposed(const ModelSpec& spec, Model resnet, Model vit) {
  if (resnet.spec().num_classes != vit.spec().num_classes) {
    throw ArgumentError("ensemble members disagree on class count: " +
                        std::to_string(resnet.spec().num_classes) + " vs " +
                        std::to_string(vit.spec().num_classes));
  }
  ModelSpec full = spec;
  full.kind = ModelKind::kProposedEnsemble;
  full.members = {resnet.spec(), vit.spec()};
  full.Validate();
  std::vector<NamedParam> params;
  for (const NamedParam& p : resnet.params()) {
    params.push_back(NamedParam{"resnet." + p.name, p.value});
  }
  for (const NamedParam& p : vit.params()) {
    params.push_back(NamedParam{"vit." + p.name, p.value});
  }
  std::vector<Model> members;
  members.push_back(std::move(resnet));
  members.push_back(std::move(vit));
  return Model(std::move(full), std::move(params), std::move(members));
}

Model BuildModel(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::kBasicCnn:
      return BuildBasicCnn(spec);
    case ModelKind::kResNetStyle:
      return BuildResNetStyle(spec);
    case ModelKind::kViT:
      return BuildViT(spec);
    case ModelKind::kProposedEnsemble:
      spec.Validate();
      return BuildProposed(spec, BuildResNetStyle(spec.members[0]),
                           BuildViT(spec.members[1]));
  }
  throw ArgumentError("unknown model kind");
}

Tensor ResidualBlock(Graph& graph, const Tensor& x,
                     const ResidualBlockParams& params) {
  if (x.rank() != 3) {
    throw ShapeError("residual_block: expected [C x H x W], got " +
                     ShapeToString(x.shape()));
  }
  const std::size_t c = x.dim(0);
  for (const Tensor* w : {&params.conv1_weight, &params.conv2_weight}) {
    if (w->rank() != 4 || w->dim(0) != c || w->dim(1) != c) {
      throw ShapeError("residual_block: input has " + std::to_string(c) +
                       " channels but block kernels are " +
                       ShapeToString(w->shape()));
    }
  }
  Tensor h = graph.Relu(graph.Conv2d(x, params.conv1_weight, params.conv1_bias,
                                     1, kPadding));
  h = graph.Conv2d(h, params.conv2_weight, params.conv2_bias, 1, kPadding);
  if (h.shape() != x.shape()) {
    throw ShapeError("residual_block: branch output " +
                     ShapeToString(h.shape()) + " does not match input " +
                     ShapeToString(x.shape()));
  }
  return graph.Relu(graph.Add(h, x));
}

Tensor Patchify(Graph& graph, const Tensor& image, std::size_t patch_size) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw ShapeError("patchify: expected [1 x H x W], got " +
                     ShapeToString(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (patch_size == 0 || h % patch_size != 0 || w % patch_size != 0) {
    throw ShapeError("patchify: image " + ShapeToString(image.shape()) +
                     " not divisible by patch size " +
                     std::to_string(patch_size));
  }
  const std::size_t ph = h / patch_size, pw = w / patch_size;
  const std::size_t dim = patch_size * patch_size;
  std::vector<std::size_t> index;
  index.reserve(h * w);
  for (std::size_t py = 0; py < ph; ++py) {
    for (std::size_t px = 0; px < pw; ++px) {
      for (std::size_t y = 0; y < patch_size; ++y) {
        for (std::size_t x = 0; x < patch_size; ++x) {
          index.push_back((py * patch_size + y) * w + px * patch_size + x);
        }
      }
    }
  }
  return graph.Gather(image, std::move(index), {ph * pw, dim});
}

Tensor Unpatchify(const Tensor& patches, std::size_t height, std::size_t width,
                  std::size_t patch_size) {
  if (patch_size == 0 || height % patch_size != 0 ||
      width % patch_size != 0) {
    throw ShapeError("unpatchify: " + std::to_string(height) + "x" +
                     std::to_string(width) + " not divisible by patch size " +
                     std::to_string(patch_size));
  }
  const std::size_t ph = height / patch_size, pw = width / patch_size;
  if (patches.shape() != Shape{ph * pw, patch_size * patch_size}) {
    throw ShapeError("unpatchify: patches " + ShapeToString(patches.shape()) +
                     " do not tile a " + std::to_string(height) + "x" +
                     std::to_string(width) + " image");
  }
  auto pv = patches.values();
  std::vector<double> out(height * width);
  std::size_t i = 0;
  for (std::size_t py = 0; py < ph; ++py) {
    for (std::size_t px = 0; px < pw; ++px) {
      for (std::size_t y = 0; y < patch_size; ++y) {
        for (std::size_t x = 0; x < patch_size; ++x) {
          out[(py * patch_size + y) * width + px * patch_size + x] = pv[i++];
        }
      }
    }
  }
  return Tensor::FromValues({1, height, width}, std::move(out));
}

Tensor PatchEmbedAndPosition(Graph& graph, const Tensor& patches,
                             const PatchEmbedParams& params) {
  if (patches.rank() != 2 || params.positions.rank() != 2 ||
      params.positions.dim(0) != patches.dim(0)) {
    throw ShapeError("patch_embed: position table " +
                     ShapeToString(params.positions.shape()) +
                     " does not match patches " +
                     ShapeToString(patches.shape()));
  }
  return graph.Add(graph.MatMul(patches, params.projection),
                   params.positions);
}

Tensor AttentionBlock(Graph& graph, const Tensor& x,
                      const AttentionBlockParams& params,
                      std::vector<Tensor>* attention) {
  if (x.rank() != 2) {
    throw ShapeError("attention_block: expected [T x D], got " +
                     ShapeToString(x.shape()));
  }
  const std::size_t d = x.dim(1);
  const std::size_t heads = params.num_heads;
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention_block: width " + std::to_string(d) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Tensor h = graph.LayerNorm(x, params.ln1_gamma, params.ln1_beta,
                             kLayerNormEps);
  Tensor q = graph.AddRow(graph.MatMul(h, params.wq), params.bq);
  Tensor k = graph.AddRow(graph.MatMul(h, params.wk), params.bk);
  Tensor v = graph.AddRow(graph.MatMul(h, params.wv), params.bv);
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t head = 0; head < heads; ++head) {
    const std::size_t c0 = head * head_dim;
    Tensor qh = heads == 1 ? q : graph.SliceCols(q, c0, head_dim);
    Tensor kh = heads == 1 ? k : graph.SliceCols(k, c0, head_dim);
    Tensor vh = heads == 1 ? v : graph.SliceCols(v, c0, head_dim);
    Tensor scores = graph.MulScalar(graph.MatMul(qh, graph.Transpose(kh)),
                                    scale);
    Tensor weights = graph.Softmax(scores);
    if (attention) attention->push_back(weights);
    outputs.push_back(graph.MatMul(weights, vh));
  }
  Tensor merged = heads == 1 ? outputs[0] : graph.ConcatCols(outputs);
  Tensor attended = graph.AddRow(graph.MatMul(merged, params.wo), params.bo);
  Tensor y = graph.Add(x, attended);

  Tensor h2 = graph.LayerNorm(y, params.ln2_gamma, params.ln2_beta,
                              kLayerNormEps);
  Tensor f = graph.Relu(graph.AddRow(graph.MatMul(h2, params.w1), params.b1));
  f = graph.AddRow(graph.MatMul(f, params.w2), params.b2);
  return graph.Add(y, f);
}

}  // namespace lungbench
