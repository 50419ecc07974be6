// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relit/image.hpp"

namespace relit {

// Images are unit range (MAX = 1); 8-bit inputs are divided by 255 on load.

/// 10 log10(1 / MSE) over all pixels and channels, or over mask pixels when a mask is given.
/// Identical images yield +infinity.
double psnr(const RasterImage& a, const RasterImage& b, const ScalarMap* mask = nullptr);

struct SsimOptions {
  int window = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean local SSIM with a Gaussian window over all window positions that fit inside the image
/// ("valid" placement), averaged over the three channels. With a mask, only windows whose
/// centre pixel is masked contribute.
double ssim(const RasterImage& a, const RasterImage& b, const SsimOptions& options = {},
            const ScalarMap* mask = nullptr);

struct MetricEntry {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  /// Mean over entries; +infinity only when every entry is +infinity.
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::vector<MetricEntry> per_image;
};

MetricReport summarize(std::vector<MetricEntry> entries);

}  // namespace relit
