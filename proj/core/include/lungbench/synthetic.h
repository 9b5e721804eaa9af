#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "lungbench/dataset.h"

namespace lungbench {

struct SplitCounts {
  int train = 0;
  int validation = 0;
  int test = 0;

  int Get(Split split) const;
};

// Large-scale profile: 2000 / 400 / 600 per class.
inline constexpr SplitCounts kPaperScaleCounts = {2000, 400, 600};
// Default desk-scale profile: 50 / 10 / 15 per class.
inline constexpr SplitCounts kDeskScaleCounts = {50, 10, 15};

struct SyntheticRequest {
  std::array<SplitCounts, kNumClasses> counts{};
  int side = 32;
  std::uint64_t seed = 7;

  static SyntheticRequest Uniform(SplitCounts per_class, int side,
                                  std::uint64_t seed);
};

// One synthetic chest-like image of the given class: a noisy background
// with class-specific structure placed in class-specific lung zones, shifted
// to a random mean intensity so that brightness alone does not identify the
// class. Values are quantized to multiples of 1/255. Pure in its arguments.
Tensor SynthesizeImage(ClassLabel label, int side, std::uint64_t seed);

// Writes images under out_dir/images/<split>/ and out_dir/manifest.csv.
// Manifest rows are ordered split, then class, then index.
DatasetManifest GenerateSynthetic(const SyntheticRequest& request,
                                  const std::filesystem::path& out_dir);

}  // namespace lungbench
