// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relit/neural/layers.hpp"

namespace relit::nn {

/// Adversarial losses over a list of per-scale discriminator outputs.
/// loss_d = sum_k -(mean log D(real_k) + mean log(1 - D(fake_k)));
/// loss_g = sum_k -mean log D(fake_k) (non-saturating).
struct GanLoss {
  double loss_d = 0.0;
  double loss_g = 0.0;
  std::vector<Tensor4> d_real;    // d loss_d / d real logits
  std::vector<Tensor4> d_fake_d;  // d loss_d / d fake logits
  std::vector<Tensor4> d_fake_g;  // d loss_g / d fake logits
};

/// Inputs are raw logits; the sigmoid is applied internally in a stable form.
GanLoss gan_loss(std::span<const Tensor4> real_logits, std::span<const Tensor4> fake_logits);

/// Inputs are probabilities in (0, 1); no gradients are produced.
GanLoss gan_loss_from_probabilities(std::span<const Tensor4> real,
                                    std::span<const Tensor4> fake);

/// sum_i mean |fake_i - real_i|. `d_fake` receives the gradient w.r.t. each fake layer.
double feature_matching_loss(std::span<const Tensor4> real, std::span<const Tensor4> fake,
                             std::vector<Tensor4>* d_fake = nullptr);

/// Fixed-weight convolution stack used in place of a pretrained network.
class FeatureExtractor {
 public:
  static constexpr int kLayers = 5;

  /// Five 3x3 conv + tanh layers; a 2x average pool follows layers 2 and 4 when the grid allows.
  static FeatureExtractor random(int in_channels, int width, std::uint64_t seed);
  /// A single layer that returns its input unchanged.
  static FeatureExtractor identity();

  [[nodiscard]] std::vector<Tensor4> features(const Tensor4& x) const;
  /// Pulls per-layer feature gradients back to the input.
  [[nodiscard]] Tensor4 backward(const Tensor4& x, std::span<const Tensor4> d_features) const;
  [[nodiscard]] std::size_t layer_count() const { return identity_ ? 1 : convs_.size(); }

 private:
  struct Trace {
    std::vector<Tensor4> inputs;
    std::vector<Tensor4> outputs;
    std::vector<int> pools;
  };
  Trace run(const Tensor4& x) const;

  bool identity_ = false;
  std::vector<Conv2d> convs_;
  std::vector<bool> pool_after_;
};

/// sum_i mean |phi_i(a) - phi_i(b)|. `d_a` receives the gradient w.r.t. `a`.
double perceptual_loss(const FeatureExtractor& extractor, const Tensor4& a, const Tensor4& b,
                       Tensor4* d_a = nullptr);

struct LossWeights {
  double lambda_fm = 10.0;
  double lambda_percep = 10.0;
  void validate() const;
};

struct LossParts {
  double gan = 0.0;
  double fm = 0.0;
  double percep = 0.0;
};

double total_objective(const LossParts& parts, const LossWeights& weights);

}  // namespace relit::nn
