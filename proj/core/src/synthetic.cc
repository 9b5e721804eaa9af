#include "lungbench/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "lungbench/error.h"
#include "lungbench/image.h"
#include "lungbench/random.h"

namespace lungbench {
namespace {

constexpr double kNoiseSigma = 0.04;

struct Canvas {
  int side;
  std::vector<double> v;

  explicit Canvas(int s) : side(s), v(static_cast<std::size_t>(s * s), 0.0) {}
  double& at(int y, int x) { return v[static_cast<std::size_t>(y * side + x)]; }

  // Adds amplitude * exp(-d^2 / (2 sigma^2)) around (cy, cx).
  void Gaussian(double cy, double cx, double sigma, double amplitude) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double dy = y - cy, dx = x - cx;
        at(y, x) += amplitude * std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
      }
    }
  }

  // Solid disc with a one-pixel soft edge.
  void Disc(double cy, double cx, double radius, double amplitude) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double d = std::hypot(y - cy, x - cx);
        at(y, x) += amplitude * std::clamp(radius + 0.5 - d, 0.0, 1.0);
      }
    }
  }
};

// Lung zones as fractions of the side: the left and right fields span
// columns [0.12, 0.45] and [0.55, 0.88], rows [0.12, 0.88].
double FieldX(Rng& rng, double s) {
  return rng.Uniform() < 0.5 ? rng.Uniform(0.18, 0.42) * s
                             : rng.Uniform(0.58, 0.82) * s;
}

void DrawCancer(Canvas& c, Rng& rng) {
  const double s = c.side;
  const int nodules = 1 + static_cast<int>(rng.Below(2));
  for (int i = 0; i < nodules; ++i) {
    const double cy = rng.Uniform(0.3, 0.7) * s;
    const double cx = FieldX(rng, s);
    c.Disc(cy, cx, rng.Uniform(0.07, 0.11) * s, rng.Uniform(0.35, 0.45));
  }
}

void DrawPneumonia(Canvas& c, Rng& rng) {
  // Diffuse consolidation in a lower zone.
  const double s = c.side;
  const double cy = rng.Uniform(0.62, 0.78) * s;
  const double cx = FieldX(rng, s);
  c.Gaussian(cy, cx, rng.Uniform(0.12, 0.16) * s, rng.Uniform(0.28, 0.36));
}

void DrawTuberculosis(Canvas& c, Rng& rng) {
  // Clusters of small nodules in the upper zones.
  const double s = c.side;
  const int spots = 7 + static_cast<int>(rng.Below(6));
  for (int i = 0; i < spots; ++i) {
    const double cy = rng.Uniform(0.14, 0.42) * s;
    const double cx = FieldX(rng, s);
    c.Disc(cy, cx, std::max(0.5, 0.03 * s), rng.Uniform(0.3, 0.4));
  }
}

void DrawFibrosis(Canvas& c, Rng& rng) {
  // Reticular striping, strongest in the lower periphery.
  const double s = c.side;
  const double theta = rng.Uniform(0.0, std::numbers::pi);
  const double period = rng.Uniform(0.11, 0.14) * s;
  const double phase = rng.Uniform(0.0, 2 * std::numbers::pi);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int y = 0; y < c.side; ++y) {
    const double weight = 0.35 + 0.65 * static_cast<double>(y) / (s - 1);
    for (int x = 0; x < c.side; ++x) {
      const double u = (x * ct + y * st) * 2 * std::numbers::pi / period;
      c.at(y, x) += 0.16 * weight * std::sin(u + phase);
    }
  }
}

}  // namespace

int SplitCounts::Get(Split split) const {
  switch (split) {
    case Split::kTrain:
      return train;
    case Split::kValidation:
      return validation;
    case Split::kTest:
      return test;
  }
  return 0;
}

SyntheticRequest SyntheticRequest::Uniform(SplitCounts per_class, int side,
                                           std::uint64_t seed) {
  SyntheticRequest r;
  r.counts.fill(per_class);
  r.side = side;
  r.seed = seed;
  return r;
}

Tensor SynthesizeImage(ClassLabel label, int side, std::uint64_t seed) {
  if (side < 16) {
    throw ArgumentError("synthetic images need side >= 16, got " +
                        std::to_string(side));
  }
  Rng rng(seed);
  Canvas c(side);
  const double s = side;

  // Two darker lung fields over a brighter mediastinum and border.
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double fy = (y - 0.5 * (s - 1)) / (0.38 * s);
      const double fl = (x - 0.3 * (s - 1)) / (0.17 * s);
      const double fr = (x - 0.7 * (s - 1)) / (0.17 * s);
      const bool in_field = fy * fy + fl * fl < 1.0 || fy * fy + fr * fr < 1.0;
      c.at(y, x) = in_field ? 0.0 : 0.18;
    }
  }

  switch (label) {
    case ClassLabel::kCancer:
      DrawCancer(c, rng);
      break;
    case ClassLabel::kPneumonia:
      DrawPneumonia(c, rng);
      break;
    case ClassLabel::kTuberculosis:
      DrawTuberculosis(c, rng);
      break;
    case ClassLabel::kFibrosis:
      DrawFibrosis(c, rng);
      break;
    case ClassLabel::kNormal:
      break;
  }

  for (double& v : c.v) v += kNoiseSigma * rng.Normal();

  // Random global brightness: shift to a drawn mean.
  double mean = 0.0;
  for (double v : c.v) mean += v;
  mean /= static_cast<double>(c.v.size());
  const double target = rng.Uniform(0.38, 0.52);
  std::vector<double> values(c.v.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double p = std::clamp(c.v[i] - mean + target, 0.0, 1.0);
    values[i] = std::round(p * 255.0) / 255.0;
  }
  const auto n = static_cast<std::size_t>(side);
  return Tensor::FromValues({1, n, n}, std::move(values));
}

DatasetManifest GenerateSynthetic(const SyntheticRequest& request,
                                  const std::filesystem::path& out_dir) {
  if (request.side < 16) {
    throw ArgumentError("synthetic images need side >= 16, got " +
                        std::to_string(request.side));
  }
  for (const SplitCounts& c : request.counts) {
    if (c.train < 0 || c.validation < 0 || c.test < 0) {
      throw ArgumentError("per-class split counts must be non-negative");
    }
  }
  namespace fs = std::filesystem;
  DatasetManifest manifest;
  manifest.root = out_dir;
  std::error_code ec;
  for (Split split : kAllSplits) {
    const fs::path dir = out_dir / "images" / std::string(SplitName(split));
    fs::create_directories(dir, ec);
    if (ec) {
      throw DataError(DataErrorKind::kIo,
                      "cannot create " + dir.string() + ": " + ec.message());
    }
    for (ClassLabel label : kAllLabels) {
      const int count =
          request.counts[static_cast<std::size_t>(label)].Get(split);
      std::string lower(LabelName(label));
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      for (int i = 0; i < count; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%05d.pgm", lower.c_str(), i);
        const std::string rel =
            "images/" + std::string(SplitName(split)) + "/" + name;
        const std::uint64_t seed = MixSeed(
            MixSeed(request.seed, static_cast<std::uint64_t>(label)),
            static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(i));
        SavePgm(SynthesizeImage(label, request.side, seed), out_dir / rel);
        manifest.entries.push_back(ManifestEntry{rel, label, split});
      }
    }
  }
  WriteManifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace lungbench
