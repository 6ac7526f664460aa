#pragma once

// PNG input/output on top of libpng's simplified API. Color inputs are
// reduced to luminance with ITU-R 601 weights; grayscale inputs pass
// through untouched. Alpha is composited onto white.

#include <png.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/image.hpp"

namespace dmt {

inline GrayImage load_image(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw ValidationError("cannot read PNG '" + path + "': " + msg);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  const png_color white{255, 255, 255};
  if (!png_image_finish_read(&png, &white, buffer.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw ValidationError("cannot decode PNG '" + path + "': " + msg);
  }
  GrayImage out(int(png.width), int(png.height));
  if (color) {
    const std::uint8_t* p = buffer.data();
    for (float& v : out.pixels) {
      v = luma601(p[0], p[1], p[2]);
      p += 3;
    }
  } else {
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
      out.pixels[i] = float(buffer[i]);
  }
  png_image_free(&png);
  return out;
}

// Reads only the header; cheap way to get dimensions during validation.
inline std::pair<int, int> image_dimensions(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw ValidationError("cannot read PNG '" + path + "': " + msg);
  }
  const std::pair<int, int> dims{int(png.width), int(png.height)};
  png_image_free(&png);
  return dims;
}

inline void save_image(const GrayImage& image, const std::string& path) {
  if (image.empty()) throw DegenerateInputError("save_image: empty image");
  std::vector<std::uint8_t> buffer(image.pixels.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const float v = image.pixels[i];
    buffer[i] = std::uint8_t(v <= 0.0f ? 0 : v >= 255.0f ? 255 : int(v + 0.5f));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(image.width);
  png.height = png_uint_32(image.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0,
                               nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw ValidationError("cannot write PNG '" + path + "': " + msg);
  }
  png_image_free(&png);
}

}  // namespace dmt
