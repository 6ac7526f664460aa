#pragma once

// Shared helpers for the test suite: scratch directories and image builders.

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "dmt/core.hpp"
#include "dmt/image.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& hint = "dmt_test") {
    const auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::filesystem::path candidate =
          base / (hint + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("TempDir: could not create scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& rel = "") const {
    return rel.empty() ? path_.string() : (path_ / rel).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline dmt::GrayImage random_image(int width, int height, dmt::Rng& rng) {
  dmt::GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(std::size_t(width) * height);
  for (float& p : img.pixels) p = float(rng.uniform(0.0, 255.0));
  return img;
}

inline dmt::GrayImage uniform_image(int width, int height, float value) {
  dmt::GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.assign(std::size_t(width) * height, value);
  return img;
}

}  // namespace testutil
