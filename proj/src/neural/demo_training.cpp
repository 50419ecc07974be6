// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/neural/demo_training.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "relit/dataset_synthesis.hpp"
#include "relit/logging.hpp"
#include "relit/morphable_model.hpp"
#include "relit/neural/attention.hpp"
#include "relit/neural/multi_spade.hpp"
#include "relit/soft_rasterizer.hpp"

namespace relit::nn {

namespace {

constexpr int kScales = 3;
constexpr int kDiscLayers = 5;

struct Batch {
  Tensor4 input;     // I_s
  Tensor4 target;    // I_t
  Tensor4 guidance;  // I_g
};

void store_image(const RasterImage& img, int n, Tensor4& t) {
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        t(n, c, y, x) = img.at(y, x, c);
      }
    }
  }
}

Batch make_batch(const DemoConfig& cfg) {
  Rng rng(cfg.seed);
  const MorphableModel model = make_synthetic_model(10, cfg.seed);
  const Camera cam = Camera::orthographic(cfg.size, cfg.size);
  const RasterConfig raster = RasterConfig::defaults_for(cam);
  std::vector<ShCoeffs> targets;
  for (int i = 0; i < cfg.pairs; ++i) {
    targets.push_back(random_lighting(rng));
  }
  const ShCoeffs mean = mean_sh(targets);
  DegradeConfig degrade;
  degrade.ideal_radius = 0.5;
  Batch b{Tensor4(cfg.pairs, 3, cfg.size, cfg.size), Tensor4(cfg.pairs, 3, cfg.size, cfg.size),
          Tensor4(cfg.pairs, 3, cfg.size, cfg.size)};
  std::normal_distribution<double> normal(0.0, 0.3);
  for (int i = 0; i < cfg.pairs; ++i) {
    FaceCoefficients coeffs = FaceCoefficients::zeros_for(model);
    for (Eigen::Index k = 0; k < coeffs.alpha.size(); ++k) {
      coeffs.alpha(k) = normal(rng);
    }
    for (Eigen::Index k = 0; k < coeffs.zeta.size(); ++k) {
      coeffs.zeta(k) = normal(rng);
    }
    Rng pair_rng(pair_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const TrainingPair pair =
        build_pair(model, coeffs, cam, raster, targets[i], mean, degrade, pair_rng);
    store_image(pair.input, i, b.input);
    store_image(pair.target, i, b.target);
    // A perfect first stage would hand the generator the target-lit rendering.
    store_image(render_guidance(model, coeffs, cam, pair.sh_target, raster), i, b.guidance);
  }
  return b;
}

// ---------------------------------------------------------------------------------------

struct Generator {
  Conv2d enc;
  AttentionBlock attn;
  MultiSpadeBlock spade;
  Conv2d dec;

  struct Trace {
    Tensor4 enc_pre, enc, pooled, attn, merged, spade, act, logits, out;
  };

  static Generator random(int channels, Rng& rng) {
    Generator g;
    g.enc = Conv2d::random(3, channels, 3, rng);
    g.attn = AttentionBlock::random(3, channels, channels, rng);
    g.spade = MultiSpadeBlock::random(channels, 3, 3, channels, rng);
    g.dec = Conv2d::random(channels, 3, 3, rng);
    return g;
  }

  Generator zeros_like() const {
    return {enc.zeros_like(), attn.zeros_like(), spade.zeros_like(), dec.zeros_like()};
  }

  void collect(ParamList& out) {
    enc.collect(out);
    attn.collect(out);
    spade.collect(out);
    dec.collect(out);
  }

  Trace forward(const Tensor4& source, const Tensor4& guidance) const {
    Trace t;
    t.enc_pre = enc.forward(source);
    t.enc = activate(t.enc_pre, Activation::kLeakyRelu);
    t.pooled = avg_pool(t.enc, 2);
    t.attn = attention_forward(attn, t.pooled, guidance);
    t.merged = upsample_nearest(t.attn, 2);
    t.merged += t.enc;
    t.spade = multi_spade_forward(spade, t.merged, guidance, source);
    t.act = activate(t.spade, Activation::kLeakyRelu);
    t.logits = dec.forward(t.act);
    t.out = activate(t.logits, Activation::kSigmoid);
    return t;
  }

  void backward(const Tensor4& source, const Tensor4& guidance, const Trace& t,
                const Tensor4& d_out, Generator& grads) const {
    const Tensor4 d_logits = activate_backward(t.logits, d_out, Activation::kSigmoid);
    const Tensor4 d_act = dec.backward(t.act, d_logits, grads.dec);
    const Tensor4 d_spade = activate_backward(t.spade, d_act, Activation::kLeakyRelu);
    MultiSpadeGrads sg = multi_spade_backward(spade, t.merged, guidance, source, d_spade);
    add_spade(grads.spade, sg.params);
    const AttentionGrads ag =
        attention_backward(attn, t.pooled, guidance, upsample_nearest_backward(sg.feat, 2));
    grads.attn.w_q += ag.w_q;
    grads.attn.w_k += ag.w_k;
    grads.attn.w_v += ag.w_v;
    Tensor4 d_enc = avg_pool_backward(ag.feat_in, 2);
    d_enc += sg.feat;
    enc.backward(source, activate_backward(t.enc_pre, d_enc, Activation::kLeakyRelu), grads.enc);
  }

  static void add_spade(MultiSpadeBlock& dst, MultiSpadeBlock& src) {
    ParamList a;
    ParamList b;
    dst.collect(a);
    src.collect(b);
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (std::size_t i = 0; i < a[k].size(); ++i) {
        a[k][i] += b[k][i];
      }
    }
  }
};

// ---------------------------------------------------------------------------------------

struct Discriminator {
  std::vector<std::vector<Conv2d>> scales;  // [scale][layer]

  struct ScaleTrace {
    std::vector<Tensor4> inputs;
    std::vector<Tensor4> pre;
    std::vector<Tensor4> features;  // kDiscLayers entries, the last one is the logit map
  };

  static Discriminator random(int in_channels, int width, Rng& rng) {
    Discriminator d;
    for (int s = 0; s < kScales; ++s) {
      std::vector<Conv2d> layers;
      int c = in_channels;
      for (int l = 0; l + 1 < kDiscLayers; ++l) {
        layers.push_back(Conv2d::random(c, width, 3, rng));
        c = width;
      }
      layers.push_back(Conv2d::random(c, 1, 3, rng));
      d.scales.push_back(std::move(layers));
    }
    return d;
  }

  Discriminator zeros_like() const {
    Discriminator d;
    for (const auto& layers : scales) {
      std::vector<Conv2d> z;
      for (const Conv2d& c : layers) {
        z.push_back(c.zeros_like());
      }
      d.scales.push_back(std::move(z));
    }
    return d;
  }

  void collect(ParamList& out) {
    for (auto& layers : scales) {
      for (Conv2d& c : layers) {
        c.collect(out);
      }
    }
  }

  std::vector<ScaleTrace> forward(const Tensor4& x) const {
    std::vector<ScaleTrace> out;
    for (int s = 0; s < kScales; ++s) {
      ScaleTrace t;
      Tensor4 cur = avg_pool(x, 1 << s);
      for (int l = 0; l < kDiscLayers; ++l) {
        t.inputs.push_back(cur);
        Tensor4 pre = scales[s][l].forward(cur);
        cur = l + 1 < kDiscLayers ? activate(pre, Activation::kLeakyRelu) : pre;
        t.pre.push_back(std::move(pre));
        t.features.push_back(cur);
      }
      out.push_back(std::move(t));
    }
    return out;
  }

  /// d_features[s][l] may be empty tensors for "no gradient".
  Tensor4 backward(const std::vector<ScaleTrace>& traces,
                   const std::vector<std::vector<Tensor4>>& d_features, Discriminator& grads,
                   const Tensor4& x) const {
    Tensor4 dx = Tensor4::like(x);
    for (int s = 0; s < kScales; ++s) {
      const ScaleTrace& t = traces[s];
      Tensor4 carry;
      for (int l = kDiscLayers; l-- > 0;) {
        Tensor4 g = d_features[s][l].size() != 0 ? d_features[s][l] : Tensor4::like(t.features[l]);
        if (carry.size() != 0) {
          g += carry;
        }
        if (l + 1 < kDiscLayers) {
          g = activate_backward(t.pre[l], g, Activation::kLeakyRelu);
        }
        carry = scales[s][l].backward(t.inputs[l], g, grads.scales[s][l]);
      }
      dx += avg_pool_backward(carry, 1 << s);
    }
    return dx;
  }
};

std::vector<Tensor4> logits_of(const std::vector<Discriminator::ScaleTrace>& t) {
  std::vector<Tensor4> out;
  for (const auto& s : t) {
    out.push_back(s.features.back());
  }
  return out;
}

}  // namespace

void DemoConfig::validate() const {
  if (steps < 0 || pairs < 1 || channels < 1) {
    throw InputError("demo training: steps >= 0, pairs >= 1 and channels >= 1 required");
  }
  if (size < 8 || size % 8 != 0) {
    throw InputError("demo training: image size must be a positive multiple of 8");
  }
  if (!(generator_lr > 0.0) || !(discriminator_lr > 0.0)) {
    throw InputError("demo training: learning rates must be positive");
  }
  weights.validate();
}

DemoResult run_demo_training(const DemoConfig& cfg) {
  cfg.validate();
  init_logging();
  const Batch batch = make_batch(cfg);
  Rng rng(cfg.seed + 1);
  Generator gen = Generator::random(cfg.channels, rng);
  Discriminator disc = Discriminator::random(6, cfg.channels, rng);
  const FeatureExtractor extractor = FeatureExtractor::random(3, cfg.channels, cfg.seed + 2);
  const Tensor4& reference =
      cfg.reference == PerceptualReference::kInput ? batch.input : batch.target;
  const Tensor4 real = concat_channels(batch.input, batch.target);

  AdamOptimizer g_opt(cfg.generator_lr, 0.5, 0.999);
  AdamOptimizer d_opt(cfg.discriminator_lr, 0.5, 0.999);
  ParamList g_params;
  gen.collect(g_params);
  ParamList d_params;
  disc.collect(d_params);

  DemoResult result;
  for (int step = 0; step <= cfg.steps; ++step) {
    const Generator::Trace gt = gen.forward(batch.input, batch.guidance);
    const Tensor4 fake = concat_channels(batch.input, gt.out);
    const auto real_trace = disc.forward(real);
    const auto fake_trace = disc.forward(fake);
    const std::vector<Tensor4> real_logits = logits_of(real_trace);
    const std::vector<Tensor4> fake_logits = logits_of(fake_trace);
    const GanLoss gan = gan_loss(real_logits, fake_logits);

    double fm = 0.0;
    std::vector<std::vector<Tensor4>> d_fake_features(kScales);
    for (int s = 0; s < kScales; ++s) {
      fm += feature_matching_loss(real_trace[s].features, fake_trace[s].features,
                                  &d_fake_features[s]);
    }
    Tensor4 d_percep;
    const double percep = perceptual_loss(extractor, gt.out, reference, &d_percep);

    DemoRecord rec;
    rec.step = step;
    rec.loss_d = gan.loss_d;
    rec.gan_g = gan.loss_g;
    rec.fm = fm;
    rec.percep = percep;
    rec.objective = total_objective({gan.loss_g, fm, percep}, cfg.weights);
    rec.guided = cfg.weights.lambda_fm * fm + cfg.weights.lambda_percep * percep;
    result.history.push_back(rec);
    if (step % 50 == 0 || step == cfg.steps) {
      spdlog::info("demo step {}: D {:.4f} G {:.4f} FM {:.4f} percep {:.4f}", step,
                                 rec.loss_d, rec.gan_g, fm, percep);
    }
    if (step == cfg.steps) {
      break;
    }

    // Generator: adversarial + weighted feature matching through the discriminator.
    for (int s = 0; s < kScales; ++s) {
      for (Tensor4& g : d_fake_features[s]) {
        g *= cfg.weights.lambda_fm;
      }
      d_fake_features[s].back() += gan.d_fake_g[s];
    }
    Discriminator scratch = disc.zeros_like();
    const Tensor4 d_fake_pair = disc.backward(fake_trace, d_fake_features, scratch, fake);
    Tensor4 d_input_part;
    Tensor4 d_out;
    split_channels(d_fake_pair, 3, d_input_part, d_out);
    d_percep *= cfg.weights.lambda_percep;
    d_out += d_percep;
    Generator g_grads = gen.zeros_like();
    gen.backward(batch.input, batch.guidance, gt, d_out, g_grads);

    // Discriminator: real vs. the current (detached) fake.
    Discriminator d_grads = disc.zeros_like();
    std::vector<std::vector<Tensor4>> d_real_feats(kScales, std::vector<Tensor4>(kDiscLayers));
    std::vector<std::vector<Tensor4>> d_fake_feats(kScales, std::vector<Tensor4>(kDiscLayers));
    for (int s = 0; s < kScales; ++s) {
      d_real_feats[s].back() = gan.d_real[s];
      d_fake_feats[s].back() = gan.d_fake_d[s];
    }
    disc.backward(real_trace, d_real_feats, d_grads, real);
    disc.backward(fake_trace, d_fake_feats, d_grads, fake);

    ParamList gg;
    g_grads.collect(gg);
    g_opt.step(g_params, gg);
    ParamList dg;
    d_grads.collect(dg);
    d_opt.step(d_params, dg);
  }
  return result;
}

}  // namespace relit::nn
