#include "lungbench/augment.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lungbench/error.h"
#include "lungbench/random.h"

namespace lungbench {
namespace {

void RequireSquareImage(const Tensor& pixels, const char* op) {
  if (pixels.rank() != 3 || pixels.dim(0) != 1 || pixels.dim(1) != pixels.dim(2)) {
    throw ShapeError(std::string(op) + ": expected a square [1 x S x S] image, got " +
                     ShapeToString(pixels.shape()));
  }
}

double Pixel(std::span<const double> v, std::ptrdiff_t h, std::ptrdiff_t w,
             std::ptrdiff_t y, std::ptrdiff_t x) {
  if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
  return v[static_cast<std::size_t>(y * w + x)];
}

}  // namespace

void AugmentConfig::Validate() const {
  if (!(rotation_max_degrees >= 0.0)) {
    throw ArgumentError("rotation_max_degrees must be >= 0");
  }
  if (!(zoom_low > 0.0 && zoom_low <= 1.0 && zoom_high >= 1.0)) {
    throw ArgumentError("zoom range must satisfy 0 < low <= 1 <= high");
  }
  if (!(gain_low > 0.0 && gain_low <= gain_high)) {
    throw ArgumentError("gain range must be positive and ordered");
  }
  if (!(bias_low <= bias_high)) {
    throw ArgumentError("bias range must be ordered");
  }
}

double SampleBilinear(const Tensor& pixels, double y, double x) {
  const auto h = static_cast<std::ptrdiff_t>(pixels.dim(pixels.rank() - 2));
  const auto w = static_cast<std::ptrdiff_t>(pixels.dim(pixels.rank() - 1));
  const double fy0 = std::floor(y);
  const double fx0 = std::floor(x);
  const auto y0 = static_cast<std::ptrdiff_t>(fy0);
  const auto x0 = static_cast<std::ptrdiff_t>(fx0);
  const double ty = y - fy0;
  const double tx = x - fx0;
  auto v = pixels.values();
  const double v00 = Pixel(v, h, w, y0, x0);
  const double v01 = Pixel(v, h, w, y0, x0 + 1);
  const double v10 = Pixel(v, h, w, y0 + 1, x0);
  const double v11 = Pixel(v, h, w, y0 + 1, x0 + 1);
  // Lerp form keeps constant neighborhoods exact.
  const double top = v00 + tx * (v01 - v00);
  const double bottom = v10 + tx * (v11 - v10);
  return top + ty * (bottom - top);
}

Tensor Rotate(const Tensor& pixels, double degrees) {
  RequireSquareImage(pixels, "rotate");
  const std::size_t n = pixels.dim(1);
  auto src = pixels.values();
  std::vector<double> out(src.size());

  const double quarter = degrees / 90.0;
  if (quarter == std::floor(quarter)) {
    const long turns = ((static_cast<long>(quarter) % 4) + 4) % 4;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        std::size_t sr = r, sc = c;
        switch (turns) {
          case 1: sr = n - 1 - c; sc = r; break;
          case 2: sr = n - 1 - r; sc = n - 1 - c; break;
          case 3: sr = c; sc = n - 1 - r; break;
          default: break;
        }
        out[r * n + c] = src[sr * n + sc];
      }
    }
    return Tensor::FromValues(pixels.shape(), std::move(out));
  }

  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double y = static_cast<double>(r) - center;
      const double x = static_cast<double>(c) - center;
      // Inverse of the clockwise rotation in (x right, y down) coordinates.
      const double sx = x * cs + y * sn;
      const double sy = -x * sn + y * cs;
      out[r * n + c] = std::clamp(
          SampleBilinear(pixels, sy + center, sx + center), 0.0, 1.0);
    }
  }
  return Tensor::FromValues(pixels.shape(), std::move(out));
}

Tensor Zoom(const Tensor& pixels, double factor) {
  if (!(factor > 0.0)) {
    throw ArgumentError("zoom: factor must be positive, got " +
                        std::to_string(factor));
  }
  RequireSquareImage(pixels, "zoom");
  if (factor == 1.0) return pixels.Clone();
  const std::size_t n = pixels.dim(1);
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  std::vector<double> out(pixels.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double sy = center + (static_cast<double>(r) - center) / factor;
      const double sx = center + (static_cast<double>(c) - center) / factor;
      out[r * n + c] = std::clamp(SampleBilinear(pixels, sy, sx), 0.0, 1.0);
    }
  }
  return Tensor::FromValues(pixels.shape(), std::move(out));
}

Tensor AdjustIllumination(const Tensor& pixels, double gain, double bias) {
  if (!(gain > 0.0)) {
    throw ArgumentError("adjust_illumination: gain must be positive");
  }
  std::vector<double> out(pixels.size());
  auto v = pixels.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(gain * v[i] + bias, 0.0, 1.0);
  }
  return Tensor::FromValues(pixels.shape(), std::move(out));
}

std::uint64_t AugmentSeed(std::uint64_t global_seed, std::string_view id,
                          std::uint64_t epoch) {
  return MixSeed(global_seed, Fnv1a64(id), epoch);
}

AugmentDraw DrawAugmentation(const AugmentConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  AugmentDraw d;
  d.degrees = rng.Uniform(-config.rotation_max_degrees,
                          config.rotation_max_degrees);
  d.zoom = rng.Uniform(config.zoom_low, config.zoom_high);
  d.gain = rng.Uniform(config.gain_low, config.gain_high);
  d.bias = rng.Uniform(config.bias_low, config.bias_high);
  return d;
}

ImageSample Augment(const ImageSample& sample, const AugmentConfig& config,
                    std::uint64_t epoch, std::uint64_t global_seed) {
  if (!config.enabled) return sample;
  config.Validate();
  const AugmentDraw d =
      DrawAugmentation(config, AugmentSeed(global_seed, sample.id, epoch));
  ImageSample out = sample;
  out.pixels = AdjustIllumination(Zoom(Rotate(sample.pixels, d.degrees), d.zoom),
                                  d.gain, d.bias);
  return out;
}

}  // namespace lungbench
