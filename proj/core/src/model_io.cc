#include "lungbench/model_io.h"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lungbench/error.h"

namespace lungbench {
namespace {

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutF64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& data, const std::filesystem::path& path)
      : data_(data), path_(path) {}

  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double F64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t Remaining() const { return data_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw ModelFileError(ModelFileErrorKind::kTruncated,
                           "model file " + path_.string() +
                               " is truncated at byte " + std::to_string(pos_));
    }
  }

  const std::string& data_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void WriteParameterFile(const std::filesystem::path& path,
                        std::span<const NamedParam> params) {
  std::string out(kModelMagic, 4);
  PutU32(out, static_cast<std::uint32_t>(params.size()));
  for (const NamedParam& p : params) {
    PutU32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    PutU32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) {
      PutU32(out, static_cast<std::uint32_t>(d));
    }
    for (double v : p.value.values()) PutF64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw ModelFileError(ModelFileErrorKind::kIo,
                         "cannot open " + path.string() + " for writing");
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw ModelFileError(ModelFileErrorKind::kIo,
                         "failed writing " + path.string());
  }
}

std::vector<NamedParam> ReadParameterFile(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw ModelFileError(ModelFileErrorKind::kIo,
                         "cannot open model file " + path.string());
  }
  const std::string data((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  Reader r(data, path);
  const std::string magic = r.Bytes(4);
  if (std::memcmp(magic.data(), kModelMagic, 4) != 0) {
    throw ModelFileError(ModelFileErrorKind::kVersion,
                         "model file " + path.string() +
                             " has unsupported magic/version (expected LBM1)");
  }
  const std::uint32_t count = r.U32();
  std::vector<NamedParam> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.U32();
    std::string name = r.Bytes(name_len);
    const std::uint32_t rank = r.U32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.U32());
    const std::size_t numel = ShapeNumel(shape);
    if (numel > r.Remaining() / 8) {
      throw ModelFileError(ModelFileErrorKind::kTruncated,
                           "model file " + path.string() + " is truncated in '" +
                               name + "'");
    }
    std::vector<double> values(numel);
    for (double& v : values) v = r.F64();
    params.push_back(NamedParam{
        std::move(name), Tensor::FromValues(std::move(shape), std::move(values))});
  }
  return params;
}

void SaveModel(const Model& model, const std::filesystem::path& path) {
  WriteParameterFile(path, model.params());
}

Model LoadModel(const std::filesystem::path& path, const ModelSpec& spec) {
  Model model = BuildModel(spec);
  std::vector<NamedParam> loaded = ReadParameterFile(path);
  std::vector<bool> filled(model.params().size(), false);
  for (const NamedParam& p : loaded) {
    auto params = model.params();
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const NamedParam& q) { return q.name == p.name; });
    if (it == params.end()) {
      throw ModelFileError(ModelFileErrorKind::kUnknownParameter,
                           "model file " + path.string() +
                               " has unknown parameter '" + p.name + "'");
    }
    if (it->value.shape() != p.value.shape()) {
      throw ModelFileError(
          ModelFileErrorKind::kShapeMismatch,
          "parameter '" + p.name + "' has shape " +
              ShapeToString(p.value.shape()) + " in file, model expects " +
              ShapeToString(it->value.shape()));
    }
    Tensor dst = it->value;
    std::copy(p.value.values().begin(), p.value.values().end(),
              dst.mutable_values().begin());
    filled[static_cast<std::size_t>(it - params.begin())] = true;
  }
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (!filled[i]) {
      throw ModelFileError(ModelFileErrorKind::kMissingParameter,
                           "model file " + path.string() +
                               " lacks parameter '" + model.params()[i].name +
                               "'");
    }
  }
  return model;
}

}  // namespace lungbench
