// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/image_quality.hpp"

#include <cmath>
#include <string>

namespace relit {

namespace {

void check_pair(const RasterImage& a, const RasterImage& b, const ScalarMap* mask) {
  if (!a.same_size(b)) {
    throw InputError("image sizes differ: " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
  }
  if (mask != nullptr && (mask->height != a.height() || mask->width != a.width())) {
    throw InputError("metric mask size differs from the images");
  }
}

// Pairwise summation keeps the result independent of how callers chunk the data.
double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += v[i];
    }
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

std::vector<double> gaussian_kernel(int window, double sigma) {
  std::vector<double> k(window);
  const double c = 0.5 * (window - 1);
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    k[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) {
    v /= sum;
  }
  return k;
}

// Valid-mode separable filtering of one channel of `src` (or of a product of two channels).
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& k) {
  const int win = static_cast<int>(k.size());
  const int oh = h - win + 1;
  const int ow = w - win + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < win; ++i) {
        s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      }
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < win; ++i) {
        s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double psnr(const RasterImage& a, const RasterImage& b, const ScalarMap* mask) {
  check_pair(a, b, mask);
  std::vector<double> sq;
  sq.reserve(a.data().size());
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (mask != nullptr && mask->values[p] <= 0.0) {
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      const double d = a.data()[3 * p + c] - b.data()[3 * p + c];
      sq.push_back(d * d);
    }
  }
  if (sq.empty()) {
    throw InputError("psnr: no pixels to compare");
  }
  const double mse = pairwise_sum(sq.data(), sq.size()) / static_cast<double>(sq.size());
  if (mse == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const RasterImage& a, const RasterImage& b, const SsimOptions& options,
            const ScalarMap* mask) {
  check_pair(a, b, mask);
  const int win = options.window;
  const int h = a.height();
  const int w = a.width();
  if (win < 1 || h < win || w < win) {
    throw InputError("ssim: images must be at least " + std::to_string(win) + "x" +
                     std::to_string(win));
  }
  const auto k = gaussian_kernel(win, options.gaussian_sigma);
  const double c1 = (options.k1) * (options.k1);
  const double c2 = (options.k2) * (options.k2);
  const int oh = h - win + 1;
  const int ow = w - win + 1;
  const int half = win / 2;

  double channel_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> pa(a.pixel_count()), pb(a.pixel_count()), paa(a.pixel_count()),
        pbb(a.pixel_count()), pab(a.pixel_count());
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
      const double x = a.data()[3 * p + c];
      const double y = b.data()[3 * p + c];
      pa[p] = x;
      pb[p] = y;
      paa[p] = x * x;
      pbb[p] = y * y;
      pab[p] = x * y;
    }
    const auto mu_a = filter_valid(pa, h, w, k);
    const auto mu_b = filter_valid(pb, h, w, k);
    const auto e_aa = filter_valid(paa, h, w, k);
    const auto e_bb = filter_valid(pbb, h, w, k);
    const auto e_ab = filter_valid(pab, h, w, k);

    std::vector<double> local;
    local.reserve(mu_a.size());
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        if (mask != nullptr && mask->at(y + half, x + half) <= 0.0) {
          continue;
        }
        const std::size_t i = static_cast<std::size_t>(y) * ow + x;
        const double va = e_aa[i] - mu_a[i] * mu_a[i];
        const double vb = e_bb[i] - mu_b[i] * mu_b[i];
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        local.push_back(((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
                        ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2)));
      }
    }
    if (local.empty()) {
      throw InputError("ssim: mask leaves no window to evaluate");
    }
    channel_sum += pairwise_sum(local.data(), local.size()) / static_cast<double>(local.size());
  }
  return channel_sum / 3.0;
}

MetricReport summarize(std::vector<MetricEntry> entries) {
  MetricReport report;
  if (!entries.empty()) {
    double p = 0.0;
    double s = 0.0;
    for (const auto& e : entries) {
      p += e.psnr_db;
      s += e.ssim;
    }
    report.psnr_db = p / static_cast<double>(entries.size());
    report.ssim = s / static_cast<double>(entries.size());
  }
  report.per_image = std::move(entries);
  return report;
}

}  // namespace relit
