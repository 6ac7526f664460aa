#pragma once

// HOG feature extraction: image pyramid, per-pixel gradients, 8x8-cell
// orientation histograms, and the 31-value cell descriptor used by the
// sliding-window detector (18 contrast-sensitive + 9 contrast-insensitive
// orientation features + 4 block-energy features).

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/image.hpp"

namespace dmt {

inline constexpr int kCellSize = 8;
inline constexpr int kOrientationBins = 18;  // signed bins, 20 degrees each
inline constexpr int kCellFeatures = 31;
inline constexpr int kDefaultWindow = 80;  // pixels, square

struct ExtractorConfig {
  int cell_size = kCellSize;
  int orientation_bins = kOrientationBins;
  friend bool operator==(const ExtractorConfig&, const ExtractorConfig&) =
      default;
};

// ---------------------------------------------------------------- pyramid

struct Pyramid {
  std::vector<GrayImage> levels;
  int window = kDefaultWindow;

  // Nominal factor taking level coordinates back to the original image.
  double scale_to_original(std::size_t level) const {
    return std::pow(6.0 / 5.0, double(level));
  }
};

// Level 0 is the input itself; each next level shrinks by 5/6 (floor) until
// a dimension would drop below the detection window.
inline Pyramid build_pyramid(const GrayImage& image, int window = kDefaultWindow) {
  if (image.empty()) throw DegenerateInputError("build_pyramid: empty image");
  if (window < 1) throw DegenerateInputError("build_pyramid: window must be positive");
  Pyramid pyr;
  pyr.window = window;
  pyr.levels.push_back(image);
  int w = image.width;
  int h = image.height;
  for (;;) {
    const int nw = (w * 5) / 6;
    const int nh = (h * 5) / 6;
    if (nw < window || nh < window) break;
    pyr.levels.push_back(resize_bilinear(pyr.levels.back(), nw, nh));
    w = nw;
    h = nh;
  }
  return pyr;
}

// -------------------------------------------------------------- gradients

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> orientation_bin;  // [0, kOrientationBins)
  std::vector<double> magnitude;

  std::size_t idx(int x, int y) const { return std::size_t(y) * width + x; }
};

// Central differences; border pixels keep zero magnitude. The full circle
// is split into 18 signed bins of 20 degrees each.
inline GradientField compute_gradients(const GrayImage& image) {
  if (image.width < 3 || image.height < 3)
    throw DegenerateInputError("compute_gradients: image must be at least 3x3");
  GradientField field;
  field.width = image.width;
  field.height = image.height;
  const std::size_t n = std::size_t(image.width) * image.height;
  field.orientation_bin.assign(n, 0);
  field.magnitude.assign(n, 0.0);

  constexpr double kTwoPi = 6.283185307179586476925287;
  constexpr double kBinScale = kOrientationBins / kTwoPi;
  for (int y = 1; y + 1 < image.height; ++y) {
    for (int x = 1; x + 1 < image.width; ++x) {
      const double gx = double(image.at(x + 1, y)) - double(image.at(x - 1, y));
      const double gy = double(image.at(x, y + 1)) - double(image.at(x, y - 1));
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += kTwoPi;
      int bin = int(angle * kBinScale);
      if (bin >= kOrientationBins) bin = kOrientationBins - 1;
      const std::size_t i = field.idx(x, y);
      field.orientation_bin[i] = std::uint8_t(bin);
      field.magnitude[i] = mag;
    }
  }
  return field;
}

// -------------------------------------------------------------- histograms

struct CellGrid {
  int cells_x = 0;
  int cells_y = 0;
  std::vector<std::array<double, kOrientationBins>> histograms;
  std::vector<double> energy;  // sum over the 9 opposite-bin pairs, squared

  std::size_t idx(int cx, int cy) const {
    return std::size_t(cy) * cells_x + cx;
  }
};

// Bilinearly splits each pixel's magnitude between the four cell histograms
// whose centers surround it. Cell (cx, cy) has its center at pixel
// (8*cx + 4, 8*cy + 4); weights falling outside the grid are clamped to the
// border cells so total histogram mass equals total gradient magnitude.
inline CellGrid histogramize(const GradientField& grads) {
  if (grads.width < kCellSize || grads.height < kCellSize)
    throw DegenerateInputError("histogramize: field smaller than one cell");
  CellGrid grid;
  grid.cells_x = grads.width / kCellSize;
  grid.cells_y = grads.height / kCellSize;
  const std::size_t n = std::size_t(grid.cells_x) * grid.cells_y;
  grid.histograms.assign(n, {});
  grid.energy.assign(n, 0.0);

  constexpr double kInvCell = 1.0 / kCellSize;
  const int max_cx = grid.cells_x - 1;
  const int max_cy = grid.cells_y - 1;
  for (int y = 0; y < grads.height; ++y) {
    const double v = (y - 4) * kInvCell;
    const int cy0 = int(std::floor(v));
    const double wy1 = v - cy0;
    const int ry0 = std::clamp(cy0, 0, max_cy);
    const int ry1 = std::clamp(cy0 + 1, 0, max_cy);
    for (int x = 0; x < grads.width; ++x) {
      const std::size_t i = grads.idx(x, y);
      const double mag = grads.magnitude[i];
      if (mag == 0.0) continue;
      const double u = (x - 4) * kInvCell;
      const int cx0 = int(std::floor(u));
      const double wx1 = u - cx0;
      const int rx0 = std::clamp(cx0, 0, max_cx);
      const int rx1 = std::clamp(cx0 + 1, 0, max_cx);
      const int bin = grads.orientation_bin[i];
      grid.histograms[grid.idx(rx0, ry0)][bin] += mag * (1.0 - wx1) * (1.0 - wy1);
      grid.histograms[grid.idx(rx1, ry0)][bin] += mag * wx1 * (1.0 - wy1);
      grid.histograms[grid.idx(rx0, ry1)][bin] += mag * (1.0 - wx1) * wy1;
      grid.histograms[grid.idx(rx1, ry1)][bin] += mag * wx1 * wy1;
    }
  }

  for (std::size_t c = 0; c < n; ++c) {
    const auto& h = grid.histograms[c];
    double e = 0.0;
    for (int b = 0; b < kOrientationBins / 2; ++b) {
      const double s = h[b] + h[b + kOrientationBins / 2];
      e += s * s;
    }
    grid.energy[c] = e;
  }
  return grid;
}

// ---------------------------------------------------------------- features

struct FeatureImage {
  int cells_x = 0;
  int cells_y = 0;
  std::vector<double> values;  // cells_y * cells_x * kCellFeatures

  double* cell(int cx, int cy) {
    return &values[(std::size_t(cy) * cells_x + cx) * kCellFeatures];
  }
  const double* cell(int cx, int cy) const {
    return &values[(std::size_t(cy) * cells_x + cx) * kCellFeatures];
  }
};

// Each cell is normalized by the four 2x2 blocks of cell energies that
// contain it (out-of-grid neighbors count as zero), every normalized value
// is truncated at 0.2, and the four truncated sums of the 18 signed values
// give the block-energy features.
inline FeatureImage assemble_features(const CellGrid& grid) {
  constexpr double kTruncate = 0.2;
  constexpr double kEps = 1e-10;
  constexpr double kEnergyScale = 0.2357;

  FeatureImage out;
  out.cells_x = grid.cells_x;
  out.cells_y = grid.cells_y;
  out.values.assign(std::size_t(grid.cells_x) * grid.cells_y * kCellFeatures,
                    0.0);

  auto energy_at = [&](int cx, int cy) -> double {
    if (cx < 0 || cy < 0 || cx >= grid.cells_x || cy >= grid.cells_y)
      return 0.0;
    return grid.energy[grid.idx(cx, cy)];
  };

  constexpr int kHalf = kOrientationBins / 2;
  for (int cy = 0; cy < grid.cells_y; ++cy) {
    for (int cx = 0; cx < grid.cells_x; ++cx) {
      const double e = energy_at(cx, cy);
      const std::array<double, 4> norms = {
          1.0 / std::sqrt(energy_at(cx - 1, cy - 1) + energy_at(cx, cy - 1) +
                          energy_at(cx - 1, cy) + e + kEps),
          1.0 / std::sqrt(energy_at(cx, cy - 1) + energy_at(cx + 1, cy - 1) +
                          e + energy_at(cx + 1, cy) + kEps),
          1.0 / std::sqrt(energy_at(cx - 1, cy) + e +
                          energy_at(cx - 1, cy + 1) + energy_at(cx, cy + 1) +
                          kEps),
          1.0 / std::sqrt(e + energy_at(cx + 1, cy) + energy_at(cx, cy + 1) +
                          energy_at(cx + 1, cy + 1) + kEps),
      };

      const auto& h = grid.histograms[grid.idx(cx, cy)];
      double* f = out.cell(cx, cy);
      std::array<double, 4> block_sum = {0.0, 0.0, 0.0, 0.0};
      for (int b = 0; b < kOrientationBins; ++b) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          const double v = std::min(h[b] * norms[k], kTruncate);
          acc += v;
          block_sum[k] += v;
        }
        f[b] = 0.5 * acc;
      }
      for (int b = 0; b < kHalf; ++b) {
        const double sum = h[b] + h[b + kHalf];
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += std::min(sum * norms[k], kTruncate);
        f[kOrientationBins + b] = 0.5 * acc;
      }
      for (int k = 0; k < 4; ++k)
        f[kOrientationBins + kHalf + k] = kEnergyScale * block_sum[k];
    }
  }
  return out;
}

inline FeatureImage extract_features(const GrayImage& image) {
  if (image.width < kCellSize || image.height < kCellSize)
    throw DegenerateInputError("extract_features: image smaller than one cell");
  return assemble_features(histogramize(compute_gradients(image)));
}

}  // namespace dmt
