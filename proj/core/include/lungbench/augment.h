#pragma once

#include <cstdint>
#include <string_view>

#include "lungbench/dataset.h"
#include "lungbench/tensor.h"

namespace lungbench {

// Ranges for the three training-time transforms. A disabled config is the
// identity.
struct AugmentConfig {
  bool enabled = false;
  double rotation_max_degrees = 15.0;
  double zoom_low = 0.9;
  double zoom_high = 1.1;
  double gain_low = 0.8;
  double gain_high = 1.2;
  double bias_low = -0.05;
  double bias_high = 0.05;

  // Throws ArgumentError on unordered or out-of-domain ranges.
  void Validate() const;
};

// Rotation about the image center with bilinear sampling and zero fill.
// Positive angles rotate clockwise. Multiples of 90 degrees are exact pixel
// permutations. pixels is [1 x S x S].
Tensor Rotate(const Tensor& pixels, double degrees);

// Scales about the center by factor, resampled onto the original grid.
// factor > 1 magnifies, factor < 1 shrinks with zero fill. factor == 1 is a
// bitwise copy.
Tensor Zoom(const Tensor& pixels, double factor);

// clamp(gain * p + bias, 0, 1).
Tensor AdjustIllumination(const Tensor& pixels, double gain, double bias);

// Bilinear sample at (y, x) treating out-of-grid pixels as 0.
double SampleBilinear(const Tensor& pixels, double y, double x);

struct AugmentDraw {
  double degrees = 0.0;
  double zoom = 1.0;
  double gain = 1.0;
  double bias = 0.0;
};

// Per-sample seed: MixSeed(global_seed, Fnv1a64(id), epoch).
std::uint64_t AugmentSeed(std::uint64_t global_seed, std::string_view id,
                          std::uint64_t epoch);
AugmentDraw DrawAugmentation(const AugmentConfig& config, std::uint64_t seed);

// Applies rotate -> zoom -> illumination with parameters drawn from the
// per-sample seed. Pure in (sample, config, epoch, global_seed).
ImageSample Augment(const ImageSample& sample, const AugmentConfig& config,
                    std::uint64_t epoch, std::uint64_t global_seed);

}  // namespace lungbench
