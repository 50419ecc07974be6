// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/neural/losses.hpp"

#include <cmath>
#include <string>

namespace relit::nn {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_scales(std::size_t a, std::size_t b) {
  if (a != b) {
    throw InputError("gan loss: " + std::to_string(a) + " real scales vs " + std::to_string(b) +
                     " fake scales");
  }
}

}  // namespace

GanLoss gan_loss(std::span<const Tensor4> real_logits, std::span<const Tensor4> fake_logits) {
  check_scales(real_logits.size(), fake_logits.size());
  GanLoss out;
  for (std::size_t k = 0; k < real_logits.size(); ++k) {
    const Tensor4& r = real_logits[k];
    const Tensor4& f = fake_logits[k];
    const double inv_r = 1.0 / static_cast<double>(r.size());
    const double inv_f = 1.0 / static_cast<double>(f.size());
    Tensor4 dr = Tensor4::like(r);
    Tensor4 dfd = Tensor4::like(f);
    Tensor4 dfg = Tensor4::like(f);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double x = r.data()[i];
      out.loss_d += softplus(-x) * inv_r;
      dr.data()[i] = (sigmoid(x) - 1.0) * inv_r;
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double x = f.data()[i];
      out.loss_d += softplus(x) * inv_f;
      out.loss_g += softplus(-x) * inv_f;
      dfd.data()[i] = sigmoid(x) * inv_f;
      dfg.data()[i] = (sigmoid(x) - 1.0) * inv_f;
    }
    out.d_real.push_back(std::move(dr));
    out.d_fake_d.push_back(std::move(dfd));
    out.d_fake_g.push_back(std::move(dfg));
  }
  return out;
}

GanLoss gan_loss_from_probabilities(std::span<const Tensor4> real,
                                    std::span<const Tensor4> fake) {
  check_scales(real.size(), fake.size());
  GanLoss out;
  for (std::size_t k = 0; k < real.size(); ++k) {
    double lr = 0.0;
    for (double p : real[k].data()) {
      lr += std::log(p);
    }
    double lf = 0.0;
    double lg = 0.0;
    for (double p : fake[k].data()) {
      lf += std::log1p(-p);
      lg += std::log(p);
    }
    out.loss_d -= lr / static_cast<double>(real[k].size()) + lf / static_cast<double>(fake[k].size());
    out.loss_g -= lg / static_cast<double>(fake[k].size());
  }
  return out;
}

double feature_matching_loss(std::span<const Tensor4> real, std::span<const Tensor4> fake,
                             std::vector<Tensor4>* d_fake) {
  if (real.size() != fake.size()) {
    throw InputError("feature matching: layer counts differ");
  }
  if (d_fake != nullptr) {
    d_fake->clear();
  }
  double total = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    require_same_shape(real[i], fake[i], "feature matching layer");
    const double inv = 1.0 / static_cast<double>(real[i].size());
    double s = 0.0;
    Tensor4 g = d_fake != nullptr ? Tensor4::like(fake[i]) : Tensor4();
    for (std::size_t j = 0; j < real[i].size(); ++j) {
      const double d = fake[i].data()[j] - real[i].data()[j];
      s += std::abs(d);
      if (d_fake != nullptr) {
        g.data()[j] = sign(d) * inv;
      }
    }
    total += s * inv;
    if (d_fake != nullptr) {
      d_fake->push_back(std::move(g));
    }
  }
  return total;
}

FeatureExtractor FeatureExtractor::random(int in_channels, int width, std::uint64_t seed) {
  Rng rng(seed);
  FeatureExtractor e;
  int c = in_channels;
  for (int i = 0; i < kLayers; ++i) {
    e.convs_.push_back(Conv2d::random(c, width, 3, rng, 1.5));
    e.pool_after_.push_back(i == 1 || i == 3);
    c = width;
  }
  return e;
}

FeatureExtractor FeatureExtractor::identity() {
  FeatureExtractor e;
  e.identity_ = true;
  return e;
}

FeatureExtractor::Trace FeatureExtractor::run(const Tensor4& x) const {
  Trace t;
  Tensor4 cur = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    t.inputs.push_back(cur);
    Tensor4 out = activate(convs_[i].forward(cur), Activation::kTanh);
    const bool pool =
        pool_after_[i] && out.height() % 2 == 0 && out.width() % 2 == 0 && out.height() > 1;
    t.pools.push_back(pool ? 2 : 1);
    cur = pool ? avg_pool(out, 2) : out;
    t.outputs.push_back(std::move(out));
  }
  return t;
}

std::vector<Tensor4> FeatureExtractor::features(const Tensor4& x) const {
  if (identity_) {
    return {x};
  }
  return run(x).outputs;
}

Tensor4 FeatureExtractor::backward(const Tensor4& x, std::span<const Tensor4> d_features) const {
  if (d_features.size() != layer_count()) {
    throw InputError("extractor backward: expected one gradient per layer");
  }
  if (identity_) {
    return d_features[0];
  }
  const Trace t = run(x);
  Tensor4 carry;
  for (std::size_t k = convs_.size(); k-- > 0;) {
    Tensor4 g = d_features[k];
    if (carry.size() != 0) {
      g += t.pools[k] > 1 ? avg_pool_backward(carry, t.pools[k]) : carry;
    }
    const Tensor4& y = t.outputs[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.data()[i] *= 1.0 - y.data()[i] * y.data()[i];
    }
    Conv2d scratch = convs_[k].zeros_like();
    carry = convs_[k].backward(t.inputs[k], g, scratch);
  }
  return carry;
}

double perceptual_loss(const FeatureExtractor& extractor, const Tensor4& a, const Tensor4& b,
                       Tensor4* d_a) {
  require_same_shape(a, b, "perceptual loss");
  const std::vector<Tensor4> fa = extractor.features(a);
  const std::vector<Tensor4> fb = extractor.features(b);
  if (d_a == nullptr) {
    return feature_matching_loss(fb, fa);
  }
  std::vector<Tensor4> grads;
  const double loss = feature_matching_loss(fb, fa, &grads);
  *d_a = extractor.backward(a, grads);
  return loss;
}

void LossWeights::validate() const {
  if (!(lambda_fm >= 0.0) || !(lambda_percep >= 0.0) || !std::isfinite(lambda_fm) ||
      !std::isfinite(lambda_percep)) {
    throw InputError("loss weights must be finite and non-negative");
  }
}

double total_objective(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  if (!std::isfinite(parts.gan) || !std::isfinite(parts.fm) || !std::isfinite(parts.percep)) {
    throw NumericError("total objective: non-finite loss part");
  }
  return parts.gan + weights.lambda_fm * parts.fm + weights.lambda_percep * parts.percep;
}

}  // namespace relit::nn
