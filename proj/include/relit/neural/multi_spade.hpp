// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include "relit/neural/layers.hpp"

namespace relit::nn {

/// Produces the per-position scale (eta) and shift (phi) maps from a condition image.
struct ModulationProducer {
  Conv2d shared;  // condition -> hidden, followed by ReLU
  Conv2d eta;     // hidden -> feature channels
  Conv2d phi;     // hidden -> feature channels

  static ModulationProducer random(int cond_channels, int hidden, int feat_channels, Rng& rng);
  [[nodiscard]] ModulationProducer zeros_like() const {
    return {shared.zeros_like(), eta.zeros_like(), phi.zeros_like()};
  }
  void collect(ParamList& out) {
    shared.collect(out);
    eta.collect(out);
    phi.collect(out);
  }
};

/// One spatially modulated normalisation: IN(x) * (1 + eta) + phi.
struct SpadeStage {
  ModulationProducer producer;
};

/// Two stages in sequence; the first is conditioned on the guidance, the second on the source.
struct MultiSpadeBlock {
  SpadeStage guide;
  SpadeStage source;

  static MultiSpadeBlock random(int feat_channels, int guide_channels, int source_channels,
                                int hidden, Rng& rng);
  [[nodiscard]] MultiSpadeBlock zeros_like() const {
    return {{guide.producer.zeros_like()}, {source.producer.zeros_like()}};
  }
  void collect(ParamList& out) {
    guide.producer.collect(out);
    source.producer.collect(out);
  }
};

struct Modulation {
  Tensor4 eta;
  Tensor4 phi;
};

/// Runs the producer on the condition after pooling it onto the feature grid.
Modulation modulation(const ModulationProducer& producer, const Tensor4& condition, int height,
                      int width);

Tensor4 spade_forward(const SpadeStage& stage, const Tensor4& feat, const Tensor4& condition);

Tensor4 multi_spade_forward(const MultiSpadeBlock& block, const Tensor4& feat,
                            const Tensor4& guide, const Tensor4& source);

struct MultiSpadeGrads {
  MultiSpadeBlock params;
  Tensor4 feat;
  Tensor4 guide;
  Tensor4 source;
};

MultiSpadeGrads multi_spade_backward(const MultiSpadeBlock& block, const Tensor4& feat,
                                     const Tensor4& guide, const Tensor4& source,
                                     const Tensor4& upstream);

}  // namespace relit::nn
