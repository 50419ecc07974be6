// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/neural/multi_spade.hpp"

#include <string>

namespace relit::nn {

namespace {

struct StageCache {
  int factor = 1;
  Tensor4 pooled;
  Tensor4 hidden_pre;
  Tensor4 hidden;
  Modulation mod;
  InstanceNormCache norm;
};

Tensor4 stage_forward(const SpadeStage& stage, const Tensor4& feat, const Tensor4& condition,
                      StageCache& cache) {
  const ModulationProducer& p = stage.producer;
  if (p.eta.out_channels != feat.channels()) {
    throw InputError("spade: producer emits " + std::to_string(p.eta.out_channels) +
                     " channels for feature " + feat.shape_string());
  }
  if (condition.batch() != feat.batch()) {
    throw InputError("spade: condition batch does not match feature batch");
  }
  cache.factor = pool_factor(condition, feat.height(), feat.width(), "spade condition");
  cache.pooled = avg_pool(condition, cache.factor);
  cache.hidden_pre = p.shared.forward(cache.pooled);
  cache.hidden = activate(cache.hidden_pre, Activation::kRelu);
  cache.mod.eta = p.eta.forward(cache.hidden);
  cache.mod.phi = p.phi.forward(cache.hidden);
  Tensor4 y = instance_norm(feat, &cache.norm);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y.data()[i] = y.data()[i] * (1.0 + cache.mod.eta.data()[i]) + cache.mod.phi.data()[i];
  }
  return y;
}

// Returns d/dfeat; adds parameter gradients and writes d/dcondition.
Tensor4 stage_backward(const SpadeStage& stage, const StageCache& cache,
                       const Tensor4& dy, ModulationProducer& grads, Tensor4& d_condition) {
  const ModulationProducer& p = stage.producer;
  const Tensor4& xhat = cache.norm.normalized;
  Tensor4 d_xhat = Tensor4::like(dy);
  Tensor4 d_eta = Tensor4::like(dy);
  for (std::size_t i = 0; i < dy.size(); ++i) {
    d_xhat.data()[i] = dy.data()[i] * (1.0 + cache.mod.eta.data()[i]);
    d_eta.data()[i] = dy.data()[i] * xhat.data()[i];
  }
  Tensor4 d_hidden = p.eta.backward(cache.hidden, d_eta, grads.eta);
  d_hidden += p.phi.backward(cache.hidden, dy, grads.phi);
  const Tensor4 d_hidden_pre = activate_backward(cache.hidden_pre, d_hidden, Activation::kRelu);
  const Tensor4 d_pooled = p.shared.backward(cache.pooled, d_hidden_pre, grads.shared);
  d_condition = avg_pool_backward(d_pooled, cache.factor);
  return instance_norm_backward(cache.norm, d_xhat);
}

}  // namespace

ModulationProducer ModulationProducer::random(int cond_channels, int hidden, int feat_channels,
                                              Rng& rng) {
  ModulationProducer p;
  p.shared = Conv2d::random(cond_channels, hidden, 3, rng);
  p.eta = Conv2d::random(hidden, feat_channels, 3, rng, 0.5);
  p.phi = Conv2d::random(hidden, feat_channels, 3, rng, 0.5);
  return p;
}

MultiSpadeBlock MultiSpadeBlock::random(int feat_channels, int guide_channels,
                                        int source_channels, int hidden, Rng& rng) {
  MultiSpadeBlock b;
  b.guide.producer = ModulationProducer::random(guide_channels, hidden, feat_channels, rng);
  b.source.producer = ModulationProducer::random(source_channels, hidden, feat_channels, rng);
  return b;
}

Modulation modulation(const ModulationProducer& producer, const Tensor4& condition, int height,
                      int width) {
  const Tensor4 pooled = avg_pool(condition, pool_factor(condition, height, width, "modulation"));
  const Tensor4 hidden = activate(producer.shared.forward(pooled), Activation::kRelu);
  return {producer.eta.forward(hidden), producer.phi.forward(hidden)};
}

Tensor4 spade_forward(const SpadeStage& stage, const Tensor4& feat, const Tensor4& condition) {
  StageCache cache;
  return stage_forward(stage, feat, condition, cache);
}

Tensor4 multi_spade_forward(const MultiSpadeBlock& block, const Tensor4& feat,
                            const Tensor4& guide, const Tensor4& source) {
  StageCache c1;
  StageCache c2;
  const Tensor4 y1 = stage_forward(block.guide, feat, guide, c1);
  return stage_forward(block.source, y1, source, c2);
}

MultiSpadeGrads multi_spade_backward(const MultiSpadeBlock& block, const Tensor4& feat,
                                     const Tensor4& guide, const Tensor4& source,
                                     const Tensor4& upstream) {
  StageCache c1;
  StageCache c2;
  const Tensor4 y1 = stage_forward(block.guide, feat, guide, c1);
  const Tensor4 out = stage_forward(block.source, y1, source, c2);
  require_same_shape(out, upstream, "multi-spade upstream gradient");
  MultiSpadeGrads g{block.zeros_like(), {}, {}, {}};
  const Tensor4 d_y1 =
      stage_backward(block.source, c2, upstream, g.params.source.producer, g.source);
  g.feat = stage_backward(block.guide, c1, d_y1, g.params.guide.producer, g.guide);
  return g;
}

}  // namespace relit::nn
