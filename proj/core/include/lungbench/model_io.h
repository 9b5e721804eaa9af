#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lungbench/models.h"

namespace lungbench {

// Binary parameter file:
//   "LBM1"
//   u32 count
//   count x { u32 name_len, name bytes (UTF-8), u32 rank, rank x u32 dim,
//             numel x f64 }
// All integers and doubles are little-endian.
inline constexpr char kModelMagic[4] = {'L', 'B', 'M', '1'};

void WriteParameterFile(const std::filesystem::path& path,
                        std::span<const NamedParam> params);
std::vector<NamedParam> ReadParameterFile(const std::filesystem::path& path);

void SaveModel(const Model& model, const std::filesystem::path& path);

// Builds the architecture described by spec and fills it from the file.
// Every file parameter must exist in the model with the same shape, and
// every model parameter must be present in the file.
Model LoadModel(const std::filesystem::path& path, const ModelSpec& spec);

}  // namespace lungbench
