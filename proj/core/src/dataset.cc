#include "lungbench/dataset.h"

#include <fstream>
#include <set>
#include <sstream>

#include "lungbench/error.h"
#include "lungbench/image.h"

namespace lungbench {
namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "Cancer", "Pneumonia", "Tuberculosis", "Fibrosis", "Normal"};
constexpr std::array<std::string_view, 3> kSplitNames = {"train", "validation",
                                                          "test"};

std::string Trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(Trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string_view LabelName(ClassLabel label) {
  return kLabelNames[static_cast<std::size_t>(label)];
}

ClassLabel ParseLabel(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kLabelNames[i] == name) return static_cast<ClassLabel>(i);
  }
  throw DataError(DataErrorKind::kUnknownLabel,
                  "unknown label '" + std::string(name) +
                      "' (expected Cancer|Pneumonia|Tuberculosis|Fibrosis|Normal)");
}

std::string_view SplitName(Split split) {
  return kSplitNames[static_cast<std::size_t>(split)];
}

Split ParseSplit(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  }
  throw DataError(DataErrorKind::kUnknownSplit,
                  "unknown split '" + std::string(name) +
                      "' (expected train|validation|test)");
}

std::size_t DatasetManifest::Count(ClassLabel label, Split split) const {
  std::size_t n = 0;
  for (const ManifestEntry& e : entries) {
    if (e.label == label && e.split == split) ++n;
  }
  return n;
}

std::size_t DatasetManifest::Count(Split split) const {
  std::size_t n = 0;
  for (const ManifestEntry& e : entries) {
    if (e.split == split) ++n;
  }
  return n;
}

DatasetManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw DataError(DataErrorKind::kIo, "cannot open manifest " + path.string());
  }
  DatasetManifest manifest;
  manifest.root = path.parent_path();
  std::string line;
  if (!std::getline(f, line) || Trim(line) != "path,label,split") {
    throw DataError(DataErrorKind::kMalformed,
                    path.string() + ": expected header 'path,label,split'");
  }
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto fields = SplitCsv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 3) {
      throw DataError(DataErrorKind::kMalformed,
                      where + ": expected 3 fields, got " +
                          std::to_string(fields.size()));
    }
    ManifestEntry entry;
    entry.path = fields[0];
    try {
      entry.label = ParseLabel(fields[1]);
      entry.split = ParseSplit(fields[2]);
    } catch (const DataError& e) {
      throw DataError(e.kind(), where + ": " + e.what());
    }
    if (!seen.insert(entry.path).second) {
      throw DataError(DataErrorKind::kDuplicatePath,
                      where + ": duplicate path '" + entry.path + "'");
    }
    if (!std::filesystem::exists(manifest.root / entry.path)) {
      throw DataError(DataErrorKind::kMissingFile,
                      where + ": missing image file '" + entry.path + "'");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw DataError(DataErrorKind::kIo, "cannot write manifest " + path.string());
  }
  f << "path,label,split\n";
  for (const ManifestEntry& e : manifest.entries) {
    f << e.path << ',' << LabelName(e.label) << ',' << SplitName(e.split)
      << '\n';
  }
  if (!f) {
    throw DataError(DataErrorKind::kIo, "failed writing " + path.string());
  }
}

std::vector<ImageSample> SplitView(const DatasetManifest& manifest,
                                   Split split) {
  std::vector<ImageSample> samples;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != split) continue;
    samples.push_back(
        ImageSample{e.path, LoadPgm(manifest.root / e.path), e.label, e.split});
  }
  return samples;
}

Tensor StackPixels(std::span<const ImageSample> samples) {
  if (samples.empty()) {
    throw DataError(DataErrorKind::kEmpty, "cannot stack an empty sample set");
  }
  const Shape& inner = samples[0].pixels.shape();
  std::vector<double> values;
  values.reserve(samples.size() * samples[0].pixels.size());
  for (const ImageSample& s : samples) {
    if (s.pixels.shape() != inner) {
      throw ShapeError("sample '" + s.id + "' has shape " +
                       ShapeToString(s.pixels.shape()) + ", expected " +
                       ShapeToString(inner));
    }
    values.insert(values.end(), s.pixels.values().begin(),
                  s.pixels.values().end());
  }
  Shape shape{samples.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return Tensor::FromValues(std::move(shape), std::move(values));
}

}  // namespace lungbench
