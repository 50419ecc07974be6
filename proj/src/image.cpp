// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/image.hpp"

#include <algorithm>
#include <string>

namespace relit {

RasterImage::RasterImage(int height, int width, const Vec3& fill, double coverage)
    : height_(height), width_(width) {
  if (height < 0 || width < 0) {
    throw InputError("image dimensions must be non-negative, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  const std::size_t n = pixel_count();
  pixels_.resize(3 * n);
  for (std::size_t p = 0; p < n; ++p) {
    set_pixel(p, fill);
  }
  coverage_.assign(n, coverage);
}

void RasterImage::clamp_unit() {
  for (double& v : pixels_) {
    v = std::clamp(v, 0.0, 1.0);
  }
  for (double& v : coverage_) {
    v = std::clamp(v, 0.0, 1.0);
  }
}

}  // namespace relit
