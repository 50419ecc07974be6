// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstddef>
#include <vector>

#include "relit/common.hpp"

namespace relit {

/// H x W x 3 float image with a per-pixel coverage channel. Pixels are row-major, channels
/// interleaved. Values live in [0,1].
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int height, int width, const Vec3& fill = Vec3::Zero(), double coverage = 1.0);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  [[nodiscard]] bool same_size(const RasterImage& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  [[nodiscard]] std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }
  double& at(int y, int x, int c) { return pixels_[3 * index(y, x) + c]; }
  [[nodiscard]] double at(int y, int x, int c) const { return pixels_[3 * index(y, x) + c]; }

  [[nodiscard]] Vec3 pixel(std::size_t p) const {
    return {pixels_[3 * p], pixels_[3 * p + 1], pixels_[3 * p + 2]};
  }
  void set_pixel(std::size_t p, const Vec3& rgb) {
    pixels_[3 * p] = rgb.x();
    pixels_[3 * p + 1] = rgb.y();
    pixels_[3 * p + 2] = rgb.z();
  }

  std::vector<double>& data() { return pixels_; }
  [[nodiscard]] const std::vector<double>& data() const { return pixels_; }
  std::vector<double>& coverage() { return coverage_; }
  [[nodiscard]] const std::vector<double>& coverage() const { return coverage_; }

  /// Clamps every pixel and coverage entry into [0,1].
  void clamp_unit();

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
  std::vector<double> coverage_;
};

/// Single-channel H x W map (shading, masks as doubles).
struct ScalarMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  ScalarMap() = default;
  ScalarMap(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] double at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

}  // namespace relit
