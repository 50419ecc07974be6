// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/neural/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace relit::nn {

namespace {

constexpr double kLeakySlope = 0.2;

}  // namespace

Conv2d::Conv2d(int in, int out, int kernel_size)
    : in_channels(in), out_channels(out), kernel(kernel_size) {
  if (in < 1 || out < 1 || kernel_size < 1 || kernel_size % 2 == 0) {
    throw InputError("conv2d needs positive channel counts and an odd kernel");
  }
  weight.assign(static_cast<std::size_t>(out) * in * kernel_size * kernel_size, 0.0);
  bias.assign(static_cast<std::size_t>(out), 0.0);
}

Conv2d Conv2d::random(int in, int out, int kernel_size, Rng& rng, double gain) {
  Conv2d conv(in, out, kernel_size);
  std::normal_distribution<double> normal(0.0, gain / std::sqrt(in * kernel_size * kernel_size));
  for (double& v : conv.weight) {
    v = normal(rng);
  }
  std::uniform_real_distribution<double> uni(-0.05, 0.05);
  for (double& v : conv.bias) {
    v = uni(rng);
  }
  return conv;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Columns are output positions; rows are (channel, ky, kx) taps.
RowMatrix im2col(const Tensor4& x, int n, int kernel) {
  const int h = x.height();
  const int w = x.width();
  const int r = kernel / 2;
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(x.channels()) * kernel * kernel,
                                   static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < x.channels(); ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - r;
          if (sy < 0 || sy >= h) {
            continue;
          }
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - r;
            if (sx >= 0 && sx < w) {
              cols(row, static_cast<Eigen::Index>(y) * w + xx) = x(n, c, sy, sx);
            }
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& cols, int n, int kernel, Tensor4& dx) {
  const int h = dx.height();
  const int w = dx.width();
  const int r = kernel / 2;
  for (int c = 0; c < dx.channels(); ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - r;
          if (sy < 0 || sy >= h) {
            continue;
          }
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - r;
            if (sx >= 0 && sx < w) {
              dx(n, c, sy, sx) += cols(row, static_cast<Eigen::Index>(y) * w + xx);
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor4 Conv2d::forward(const Tensor4& x) const {
  if (x.channels() != in_channels) {
    throw InputError("conv2d expects " + std::to_string(in_channels) + " input channels, got " +
                     x.shape_string());
  }
  const Eigen::Index taps = static_cast<Eigen::Index>(in_channels) * kernel * kernel;
  const Eigen::Map<const RowMatrix> wm(weight.data(), out_channels, taps);
  const Eigen::Map<const Eigen::VectorXd> b(bias.data(), out_channels);
  Tensor4 y(x.batch(), out_channels, x.height(), x.width());
  const Eigen::Index positions = static_cast<Eigen::Index>(x.plane());
  for (int n = 0; n < x.batch(); ++n) {
    Eigen::Map<RowMatrix> out(&y.data()[y.offset(n, 0, 0, 0)], out_channels, positions);
    out.noalias() = wm * im2col(x, n, kernel);
    out.colwise() += b;
  }
  return y;
}

Tensor4 Conv2d::backward(const Tensor4& x, const Tensor4& dy, Conv2d& grads) const {
  const Eigen::Index taps = static_cast<Eigen::Index>(in_channels) * kernel * kernel;
  const Eigen::Index positions = static_cast<Eigen::Index>(x.plane());
  const Eigen::Map<const RowMatrix> wm(weight.data(), out_channels, taps);
  Eigen::Map<RowMatrix> gw(grads.weight.data(), out_channels, taps);
  Eigen::Map<Eigen::VectorXd> gb(grads.bias.data(), out_channels);
  Tensor4 dx = Tensor4::like(x);
  for (int n = 0; n < x.batch(); ++n) {
    const Eigen::Map<const RowMatrix> g(&dy.data()[dy.offset(n, 0, 0, 0)], out_channels,
                                        positions);
    const RowMatrix cols = im2col(x, n, kernel);
    gw.noalias() += g * cols.transpose();
    gb += g.rowwise().sum();
    const RowMatrix dcols = wm.transpose() * g;
    col2im_add(dcols, n, kernel, dx);
  }
  return dx;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw InputError("concat: " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor4 out(a.batch(), a.channels() + b.channels(), a.height(), a.width());
  const std::size_t pa = a.plane() * a.channels();
  const std::size_t pb = b.plane() * b.channels();
  for (int n = 0; n < a.batch(); ++n) {
    auto dst = out.data().begin() + static_cast<std::ptrdiff_t>(out.offset(n, 0, 0, 0));
    auto sa = a.data().begin() + static_cast<std::ptrdiff_t>(a.offset(n, 0, 0, 0));
    auto sb = b.data().begin() + static_cast<std::ptrdiff_t>(b.offset(n, 0, 0, 0));
    std::copy(sa, sa + static_cast<std::ptrdiff_t>(pa), dst);
    std::copy(sb, sb + static_cast<std::ptrdiff_t>(pb), dst + static_cast<std::ptrdiff_t>(pa));
  }
  return out;
}

void split_channels(const Tensor4& d, int first_channels, Tensor4& da, Tensor4& db) {
  da = Tensor4(d.batch(), first_channels, d.height(), d.width());
  db = Tensor4(d.batch(), d.channels() - first_channels, d.height(), d.width());
  for (int n = 0; n < d.batch(); ++n) {
    for (int c = 0; c < d.channels(); ++c) {
      Tensor4& dst = c < first_channels ? da : db;
      const int dc = c < first_channels ? c : c - first_channels;
      std::copy_n(d.data().begin() + static_cast<std::ptrdiff_t>(d.offset(n, c, 0, 0)),
                  d.plane(),
                  dst.data().begin() + static_cast<std::ptrdiff_t>(dst.offset(n, dc, 0, 0)));
    }
  }
}

int pool_factor(const Tensor4& x, int h, int w, const char* what) {
  if (h < 1 || w < 1 || x.height() % h != 0 || x.width() % w != 0 ||
      x.height() / h != x.width() / w) {
    throw InputError(std::string(what) + ": cannot pool " + x.shape_string() + " onto " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  return x.height() / h;
}

Tensor4 avg_pool(const Tensor4& x, int factor) {
  if (factor == 1) {
    return x;
  }
  Tensor4 y(x.batch(), x.channels(), x.height() / factor, x.width() / factor);
  const double inv = 1.0 / (factor * factor);
  for (int n = 0; n < x.batch(); ++n) {
    for (int c = 0; c < x.channels(); ++c) {
      for (int yy = 0; yy < y.height(); ++yy) {
        for (int xx = 0; xx < y.width(); ++xx) {
          double s = 0.0;
          for (int dy = 0; dy < factor; ++dy) {
            for (int dx = 0; dx < factor; ++dx) {
              s += x(n, c, yy * factor + dy, xx * factor + dx);
            }
          }
          y(n, c, yy, xx) = s * inv;
        }
      }
    }
  }
  return y;
}

Tensor4 avg_pool_backward(const Tensor4& dy, int factor) {
  Tensor4 dx = upsample_nearest(dy, factor);
  dx *= 1.0 / (factor * factor);
  return dx;
}

Tensor4 upsample_nearest(const Tensor4& x, int factor) {
  if (factor == 1) {
    return x;
  }
  Tensor4 y(x.batch(), x.channels(), x.height() * factor, x.width() * factor);
  for (int n = 0; n < y.batch(); ++n) {
    for (int c = 0; c < y.channels(); ++c) {
      for (int yy = 0; yy < y.height(); ++yy) {
        for (int xx = 0; xx < y.width(); ++xx) {
          y(n, c, yy, xx) = x(n, c, yy / factor, xx / factor);
        }
      }
    }
  }
  return y;
}

Tensor4 upsample_nearest_backward(const Tensor4& dy, int factor) {
  Tensor4 dx = avg_pool(dy, factor);
  dx *= static_cast<double>(factor * factor);
  return dx;
}

Tensor4 activate(const Tensor4& x, Activation a) {
  Tensor4 y = x;
  for (double& v : y.data()) {
    switch (a) {
      case Activation::kIdentity:
        break;
      case Activation::kRelu:
        v = v > 0.0 ? v : 0.0;
        break;
      case Activation::kLeakyRelu:
        v = v > 0.0 ? v : kLeakySlope * v;
        break;
      case Activation::kTanh:
        v = std::tanh(v);
        break;
      case Activation::kSigmoid:
        v = 1.0 / (1.0 + std::exp(-v));
        break;
    }
  }
  return y;
}

Tensor4 activate_backward(const Tensor4& x, const Tensor4& dy, Activation a) {
  require_same_shape(x, dy, "activation backward");
  Tensor4 dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double v = x.data()[i];
    double d = 1.0;
    switch (a) {
      case Activation::kIdentity:
        break;
      case Activation::kRelu:
        d = v > 0.0 ? 1.0 : 0.0;
        break;
      case Activation::kLeakyRelu:
        d = v > 0.0 ? 1.0 : kLeakySlope;
        break;
      case Activation::kTanh: {
        const double t = std::tanh(v);
        d = 1.0 - t * t;
        break;
      }
      case Activation::kSigmoid: {
        const double s = 1.0 / (1.0 + std::exp(-v));
        d = s * (1.0 - s);
        break;
      }
    }
    dx.data()[i] *= d;
  }
  return dx;
}

Tensor4 instance_norm(const Tensor4& x, InstanceNormCache* cache) {
  Tensor4 y = Tensor4::like(x);
  std::vector<double> inv_std(static_cast<std::size_t>(x.batch()) * x.channels());
  const std::size_t plane = x.plane();
  for (int n = 0; n < x.batch(); ++n) {
    for (int c = 0; c < x.channels(); ++c) {
      const double* src = &x.data()[x.offset(n, c, 0, 0)];
      double mean = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        mean += src[i];
      }
      mean /= static_cast<double>(plane);
      double var = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        var += (src[i] - mean) * (src[i] - mean);
      }
      var /= static_cast<double>(plane);
      const double s = 1.0 / std::sqrt(var + kInstanceNormEps);
      inv_std[static_cast<std::size_t>(n) * x.channels() + c] = s;
      double* dst = &y.data()[y.offset(n, c, 0, 0)];
      for (std::size_t i = 0; i < plane; ++i) {
        dst[i] = (src[i] - mean) * s;
      }
    }
  }
  if (cache != nullptr) {
    cache->normalized = y;
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Tensor4 instance_norm_backward(const InstanceNormCache& cache, const Tensor4& dy) {
  const Tensor4& xhat = cache.normalized;
  require_same_shape(xhat, dy, "instance norm backward");
  Tensor4 dx = Tensor4::like(dy);
  const std::size_t plane = dy.plane();
  for (int n = 0; n < dy.batch(); ++n) {
    for (int c = 0; c < dy.channels(); ++c) {
      const std::size_t o = dy.offset(n, c, 0, 0);
      double mean_dy = 0.0;
      double mean_dy_xhat = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        mean_dy += dy.data()[o + i];
        mean_dy_xhat += dy.data()[o + i] * xhat.data()[o + i];
      }
      mean_dy /= static_cast<double>(plane);
      mean_dy_xhat /= static_cast<double>(plane);
      const double s = cache.inv_std[static_cast<std::size_t>(n) * dy.channels() + c];
      for (std::size_t i = 0; i < plane; ++i) {
        dx.data()[o + i] = s * (dy.data()[o + i] - mean_dy - xhat.data()[o + i] * mean_dy_xhat);
      }
    }
  }
  return dx;
}

void AdamOptimizer::step(const ParamList& params, const ParamList& grads) {
  if (params.size() != grads.size()) {
    throw InputError("adam: parameter and gradient lists differ in length");
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::span<double> p = params[k];
    const std::span<double> g = grads[k];
    if (p.size() != g.size() || p.size() != m_[k].size()) {
      throw InputError("adam: buffer size changed between steps");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + epsilon_);
    }
  }
}

}  // namespace relit::nn
