#pragma once

#include <filesystem>

#include "lungbench/tensor.h"

namespace lungbench {

// Binary PGM (P5, maxval 255) as a [1 x H x W] tensor with values v / 255.
Tensor LoadPgm(const std::filesystem::path& path);

// Writes round(p * 255) clamped to [0, 255]. pixels is [1 x H x W] or [H x W].
void SavePgm(const Tensor& pixels, const std::filesystem::path& path);

// Maps raw byte intensities in [0, 255] to [0, 1]. Throws ArgumentError on
// out-of-range input.
Tensor Normalize(const Tensor& raw);

}  // namespace lungbench
