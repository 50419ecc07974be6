// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

// Deliberately naive reference implementations shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "relit/image.hpp"
#include "relit/neural/multi_spade.hpp"

namespace relit::oracle {

inline double psnr(const RasterImage& a, const RasterImage& b) {
  double se = 0.0;
  int n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double d = a.at(y, x, c) - b.at(y, x, c);
        se += d * d;
        ++n;
      }
    }
  }
  return 10.0 * std::log10(1.0 / (se / n));
}

/// Explicit 2-D Gaussian window at every valid placement.
inline double ssim(const RasterImage& a, const RasterImage& b, int win = 11, double sigma = 1.5,
                   double k1 = 0.01, double k2 = 0.03) {
  std::vector<double> wts(static_cast<std::size_t>(win) * win);
  double total = 0.0;
  const double r = (win - 1) / 2.0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      const double v = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * sigma * sigma));
      wts[static_cast<std::size_t>(i) * win + j] = v;
      total += v;
    }
  }
  for (double& v : wts) v /= total;
  const double c1 = k1 * k1;
  const double c2 = k2 * k2;
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    double chan = 0.0;
    int count = 0;
    for (int y = 0; y + win <= a.height(); ++y) {
      for (int x = 0; x + win <= a.width(); ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double w = wts[static_cast<std::size_t>(i) * win + j];
            ma += w * a.at(y + i, x + j, c);
            mb += w * b.at(y + i, x + j, c);
          }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double w = wts[static_cast<std::size_t>(i) * win + j];
            const double da = a.at(y + i, x + j, c) - ma;
            const double db = b.at(y + i, x + j, c) - mb;
            va += w * da * da;
            vb += w * db * db;
            cov += w * da * db;
          }
        chan += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
    sum += chan / count;
  }
  return sum / 3.0;
}

/// softmax(Q K^T * scale) V with Q = Gw Wq, K = F Wk, V = F Wv, every product as nested loops.
/// `feat` is T x Cin, `guide` is T x Cg (already warped), weights as plain row-major arrays.
inline std::vector<std::vector<double>> attention(
    const std::vector<std::vector<double>>& feat, const std::vector<std::vector<double>>& guide,
    const std::vector<std::vector<double>>& wq, const std::vector<std::vector<double>>& wk,
    const std::vector<std::vector<double>>& wv, double scale) {
  const std::size_t t = feat.size();
  const std::size_t d = wk[0].size();
  auto mul = [](const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& w) {
    std::vector<std::vector<double>> out(x.size(), std::vector<double>(w[0].size(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t k = 0; k < w.size(); ++k)
        for (std::size_t j = 0; j < w[0].size(); ++j) out[i][j] += x[i][k] * w[k][j];
    return out;
  };
  const auto q = mul(guide, wq);
  const auto k = mul(feat, wk);
  const auto v = mul(feat, wv);
  std::vector<std::vector<double>> out(t, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < t; ++i) {
    std::vector<double> s(t);
    double mx = -1e300;
    for (std::size_t j = 0; j < t; ++j) {
      double dot = 0;
      for (std::size_t e = 0; e < d; ++e) dot += q[i][e] * k[j][e];
      s[j] = dot * scale;
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (double& x : s) z += (x = std::exp(x - mx));
    for (std::size_t j = 0; j < t; ++j)
      for (std::size_t e = 0; e < d; ++e) out[i][e] += s[j] / z * v[j][e];
  }
  return out;
}

/// Per-channel standardisation with biased variance, one (n, c) plane at a time.
inline nn::Tensor4 instance_norm(const nn::Tensor4& x, double eps = 1e-5) {
  nn::Tensor4 y = nn::Tensor4::like(x);
  for (int n = 0; n < x.batch(); ++n)
    for (int c = 0; c < x.channels(); ++c) {
      double m = 0;
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) m += x(n, c, i, j);
      m /= x.height() * x.width();
      double v = 0;
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) v += (x(n, c, i, j) - m) * (x(n, c, i, j) - m);
      v /= x.height() * x.width();
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) y(n, c, i, j) = (x(n, c, i, j) - m) / std::sqrt(v + eps);
    }
  return y;
}

/// Zero-padded "same" cross-correlation, weights indexed [out][in][ky][kx].
inline nn::Tensor4 conv(const nn::Tensor4& x, const nn::Conv2d& c) {
  nn::Tensor4 y(x.batch(), c.out_channels, x.height(), x.width());
  const int r = c.kernel / 2;
  for (int n = 0; n < x.batch(); ++n)
    for (int o = 0; o < c.out_channels; ++o)
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) {
          double s = c.bias[static_cast<std::size_t>(o)];
          for (int ci = 0; ci < c.in_channels; ++ci)
            for (int ky = 0; ky < c.kernel; ++ky)
              for (int kx = 0; kx < c.kernel; ++kx) {
                const int yy = i + ky - r;
                const int xx = j + kx - r;
                if (yy >= 0 && yy < x.height() && xx >= 0 && xx < x.width())
                  s += c.w(o, ci, ky, kx) * x(n, ci, yy, xx);
              }
          y(n, o, i, j) = s;
        }
  return y;
}

inline nn::Tensor4 avg_pool(const nn::Tensor4& x, int f) {
  nn::Tensor4 y(x.batch(), x.channels(), x.height() / f, x.width() / f);
  for (int n = 0; n < y.batch(); ++n)
    for (int c = 0; c < y.channels(); ++c)
      for (int i = 0; i < y.height(); ++i)
        for (int j = 0; j < y.width(); ++j) {
          double s = 0;
          for (int a = 0; a < f; ++a)
            for (int b = 0; b < f; ++b) s += x(n, c, i * f + a, j * f + b);
          y(n, c, i, j) = s / (f * f);
        }
  return y;
}

/// IN(x) * (1 + eta) + phi with eta, phi = conv(relu(conv(pool(cond)))).
inline nn::Tensor4 spade_stage(const nn::Tensor4& x, const nn::Tensor4& cond,
                               const nn::ModulationProducer& p) {
  nn::Tensor4 hidden = oracle::conv(oracle::avg_pool(cond, cond.height() / x.height()), p.shared);
  for (double& v : hidden.data()) v = std::max(v, 0.0);
  const nn::Tensor4 eta = oracle::conv(hidden, p.eta);
  const nn::Tensor4 phi = oracle::conv(hidden, p.phi);
  nn::Tensor4 y = oracle::instance_norm(x);
  for (std::size_t i = 0; i < y.size(); ++i)
    y.data()[i] = y.data()[i] * (1.0 + eta.data()[i]) + phi.data()[i];
  return y;
}

inline double log_sigmoid(double x) { return -std::log1p(std::exp(-x)); }

}  // namespace relit::oracle
