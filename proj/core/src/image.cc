#include "lungbench/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "lungbench/error.h"

namespace lungbench {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string NextToken(const std::string& data, std::size_t& pos) {
  while (pos < data.size()) {
    const auto c = static_cast<unsigned char>(data[pos]);
    if (c == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < data.size() &&
         !std::isspace(static_cast<unsigned char>(data[pos])) &&
         data[pos] != '#') {
    ++pos;
  }
  return data.substr(start, pos - start);
}

std::size_t ParseDim(const std::string& token, const std::filesystem::path& path,
                     const char* what) {
  if (token.empty() ||
      !std::all_of(token.begin(), token.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    throw ImageError(ImageErrorKind::kSizeMismatch,
                     path.string() + ": bad PGM " + what + " '" + token + "'");
  }
  return std::stoul(token);
}

}  // namespace

Tensor LoadPgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ImageError(ImageErrorKind::kIo, "cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5') {
    throw ImageError(ImageErrorKind::kBadMagic,
                     path.string() + ": not a binary PGM (expected P5)");
  }
  std::size_t pos = 2;
  const std::size_t width = ParseDim(NextToken(data, pos), path, "width");
  const std::size_t height = ParseDim(NextToken(data, pos), path, "height");
  const std::string maxval = NextToken(data, pos);
  if (maxval != "255") {
    throw ImageError(ImageErrorKind::kBadMaxval,
                     path.string() + ": maxval must be 255, got '" + maxval +
                         "'");
  }
  if (width == 0 || height == 0) {
    throw ImageError(ImageErrorKind::kSizeMismatch,
                     path.string() + ": empty image");
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= data.size() ||
      !std::isspace(static_cast<unsigned char>(data[pos]))) {
    throw ImageError(ImageErrorKind::kSizeMismatch,
                     path.string() + ": missing raster");
  }
  ++pos;
  const std::size_t expected = width * height;
  if (data.size() - pos != expected) {
    throw ImageError(ImageErrorKind::kSizeMismatch,
                     path.string() + ": raster has " +
                         std::to_string(data.size() - pos) + " bytes, header says " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    values[i] = static_cast<unsigned char>(data[pos + i]) / 255.0;
  }
  return Tensor::FromValues({1, height, width}, std::move(values));
}

void SavePgm(const Tensor& pixels, const std::filesystem::path& path) {
  std::size_t height = 0, width = 0;
  if (pixels.rank() == 3 && pixels.dim(0) == 1) {
    height = pixels.dim(1);
    width = pixels.dim(2);
  } else if (pixels.rank() == 2) {
    height = pixels.dim(0);
    width = pixels.dim(1);
  } else {
    throw ShapeError("SavePgm: expected [1 x H x W] or [H x W], got " +
                     ShapeToString(pixels.shape()));
  }
  std::string out = "P5\n" + std::to_string(width) + " " +
                    std::to_string(height) + "\n255\n";
  for (double p : pixels.values()) {
    const double scaled = std::clamp(std::round(p * 255.0), 0.0, 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw ImageError(ImageErrorKind::kIo,
                     "cannot open " + path.string() + " for writing");
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ImageError(ImageErrorKind::kIo, "failed writing " + path.string());
}

Tensor Normalize(const Tensor& raw) {
  std::vector<double> out(raw.size());
  auto v = raw.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 255.0)) {
      throw ArgumentError("normalize: value " + std::to_string(v[i]) +
                          " at index " + std::to_string(i) +
                          " outside [0, 255]");
    }
    out[i] = v[i] / 255.0;
  }
  return Tensor::FromValues(raw.shape(), std::move(out));
}

}  // namespace lungbench
