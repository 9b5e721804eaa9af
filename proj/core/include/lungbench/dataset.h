#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lungbench/tensor.h"

namespace lungbench {

enum class ClassLabel { kCancer = 0, kPneumonia, kTuberculosis, kFibrosis, kNormal };
inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels = {
    ClassLabel::kCancer, ClassLabel::kPneumonia, ClassLabel::kTuberculosis,
    ClassLabel::kFibrosis, ClassLabel::kNormal};

enum class Split { kTrain = 0, kValidation, kTest };
inline constexpr std::array<Split, 3> kAllSplits = {
    Split::kTrain, Split::kValidation, Split::kTest};

std::string_view LabelName(ClassLabel label);
// Throws DataError(kUnknownLabel).
ClassLabel ParseLabel(std::string_view name);
std::string_view SplitName(Split split);
// Throws DataError(kUnknownSplit).
Split ParseSplit(std::string_view name);

inline int LabelIndex(ClassLabel label) { return static_cast<int>(label); }

struct ImageSample {
  std::string id;
  Tensor pixels;  // [1 x S x S], values in [0, 1]
  ClassLabel label = ClassLabel::kNormal;
  Split split = Split::kTrain;
};

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  ClassLabel label;
  Split split;
};

// CSV with header "path,label,split".
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::size_t Count(ClassLabel label, Split split) const;
  std::size_t Count(Split split) const;
};

// Validates vocabulary, path uniqueness and file existence; keeps file order.
DatasetManifest LoadManifest(const std::filesystem::path& path);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

// Loads the images of one split, in manifest order. The sample id is the
// manifest path.
std::vector<ImageSample> SplitView(const DatasetManifest& manifest, Split split);

// Stacks sample pixels into a [N x 1 x S x S] batch.
Tensor StackPixels(std::span<const ImageSample> samples);

}  // namespace lungbench
