// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <functional>
#include <vector>

#include "relit/neural/layers.hpp"

namespace relit::nn {

/// Maps the guidance image onto the feature grid. `backward` pulls a gradient on the
/// warped tensor back to the guidance.
struct Warp {
  std::function<Tensor4(const Tensor4& guidance, int height, int width)> forward;
  std::function<Tensor4(const Tensor4& guidance, const Tensor4& d_warped)> backward;

  /// Average pooling by the integer ratio between guidance and feature grids.
  static Warp average_pool();
};

/// Queries come from the warped guidance, keys and values from the input feature.
struct AttentionBlock {
  Eigen::MatrixXd w_q;  // Cg x D
  Eigen::MatrixXd w_k;  // Cin x D
  Eigen::MatrixXd w_v;  // Cin x D
  bool scaled = true;   // divide logits by sqrt(D)
  Warp warp = Warp::average_pool();

  static AttentionBlock random(int guidance_channels, int in_channels, int dim, Rng& rng);

  [[nodiscard]] int dim() const { return static_cast<int>(w_k.cols()); }
  void validate() const;
  void collect(ParamList& out);
  [[nodiscard]] AttentionBlock zeros_like() const;
};

/// Output has shape (N, D, H, W). `weights`, when given, receives one T x T row-stochastic
/// matrix per batch item.
Tensor4 attention_forward(const AttentionBlock& block, const Tensor4& feat_in,
                          const Tensor4& guidance, std::vector<Eigen::MatrixXd>* weights = nullptr);

struct AttentionGrads {
  Eigen::MatrixXd w_q;
  Eigen::MatrixXd w_k;
  Eigen::MatrixXd w_v;
  Tensor4 feat_in;
  Tensor4 guidance;
  /// dL/dV per batch item, T x D.
  std::vector<Eigen::MatrixXd> values;
};

AttentionGrads attention_backward(const AttentionBlock& block, const Tensor4& feat_in,
                                  const Tensor4& guidance, const Tensor4& upstream);

}  // namespace relit::nn
