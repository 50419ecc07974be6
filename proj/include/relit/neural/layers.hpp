// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <span>
#include <vector>

#include "relit/neural/tensor.hpp"

namespace relit::nn {

/// Stride-1 convolution with zero "same" padding and an odd square kernel.
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  std::vector<double> weight;  // [out][in][ky][kx]
  std::vector<double> bias;    // [out]

  Conv2d() = default;
  Conv2d(int in, int out, int kernel_size);

  /// Gaussian weights with stddev gain / sqrt(fan_in), small uniform bias.
  static Conv2d random(int in, int out, int kernel_size, Rng& rng, double gain = 1.0);

  [[nodiscard]] Conv2d zeros_like() const { return {in_channels, out_channels, kernel}; }
  [[nodiscard]] double& w(int o, int i, int ky, int kx) {
    return weight[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }
  [[nodiscard]] double w(int o, int i, int ky, int kx) const {
    return weight[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }

  [[nodiscard]] Tensor4 forward(const Tensor4& x) const;
  /// Adds parameter gradients into `grads` and returns d/dx.
  Tensor4 backward(const Tensor4& x, const Tensor4& dy, Conv2d& grads) const;

  void collect(std::vector<std::span<double>>& out) {
    out.emplace_back(weight);
    out.emplace_back(bias);
  }
};

/// Flat views over a module's trainable buffers, in a fixed order.
using ParamList = std::vector<std::span<double>>;

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
/// Splits a channel-concatenated gradient back into its two parts.
void split_channels(const Tensor4& d, int first_channels, Tensor4& da, Tensor4& db);

Tensor4 avg_pool(const Tensor4& x, int factor);
Tensor4 avg_pool_backward(const Tensor4& dy, int factor);
Tensor4 upsample_nearest(const Tensor4& x, int factor);
Tensor4 upsample_nearest_backward(const Tensor4& dy, int factor);

/// Integer factor that average-pools x onto an h x w grid; throws InputError otherwise.
int pool_factor(const Tensor4& x, int h, int w, const char* what);

enum class Activation { kIdentity, kRelu, kLeakyRelu, kTanh, kSigmoid };

Tensor4 activate(const Tensor4& x, Activation a);
/// dy * f'(x) evaluated at the pre-activation x.
Tensor4 activate_backward(const Tensor4& x, const Tensor4& dy, Activation a);

inline constexpr double kInstanceNormEps = 1e-5;

struct InstanceNormCache {
  Tensor4 normalized;
  std::vector<double> inv_std;  // per (n, c)
};

/// Per-sample, per-channel normalisation with biased variance and eps = 1e-5.
Tensor4 instance_norm(const Tensor4& x, InstanceNormCache* cache = nullptr);
Tensor4 instance_norm_backward(const InstanceNormCache& cache, const Tensor4& dy);

/// Adam over a fixed list of flat parameter buffers.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  /// `params` and `grads` must list buffers of equal length in the same order on every call.
  void step(const ParamList& params, const ParamList& grads);

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  int t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace relit::nn
