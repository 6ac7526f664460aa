#pragma once

// Grayscale raster held as floats so downscaled pyramid levels keep
// sub-integer precision. Pixel values live in [0, 255].

#include <algorithm>
#include <vector>

#include "dmt/core.hpp"

namespace dmt {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {}

  bool empty() const { return width <= 0 || height <= 0; }

  float& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  float at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }

  float at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }
};

// ITU-R 601 luma weights.
inline float luma601(double r, double g, double b) {
  return float(0.299 * r + 0.587 * g + 0.114 * b);
}

inline GrayImage resize_bilinear(const GrayImage& src, int new_w, int new_h) {
  if (src.empty() || new_w < 1 || new_h < 1)
    throw DegenerateInputError("resize_bilinear: empty image or target");
  GrayImage dst(new_w, new_h);
  const double sx = double(src.width) / new_w;
  const double sy = double(src.height) / new_h;
  for (int y = 0; y < new_h; ++y) {
    const double fy =
        std::clamp((y + 0.5) * sy - 0.5, 0.0, double(src.height - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_w; ++x) {
      const double fx =
          std::clamp((x + 0.5) * sx - 0.5, 0.0, double(src.width - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const double top = src.at(x0, y0) * (1.0 - wx) + src.at(x1, y0) * wx;
      const double bot = src.at(x0, y1) * (1.0 - wx) + src.at(x1, y1) * wx;
      dst.at(x, y) = float(top * (1.0 - wy) + bot * wy);
    }
  }
  return dst;
}

inline GrayImage flip_horizontal(const GrayImage& src) {
  GrayImage dst(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      dst.at(x, y) = src.at(src.width - 1 - x, y);
  return dst;
}

}  // namespace dmt
