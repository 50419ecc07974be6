// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/neural/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <span>

#include "relit/morphable_model.hpp"
#include "relit/neural/attention.hpp"
#include "relit/neural/losses.hpp"
#include "relit/neural/multi_spade.hpp"
#include "relit/soft_rasterizer.hpp"

namespace relit::nn {

namespace {

using Clock = std::chrono::steady_clock;

double dot(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a.data()[i] * b.data()[i];
  }
  return s;
}

// Perturbs every entry of `values` in place and compares against `analytic`.
GradcheckEntry check(const std::string& block, const std::string& parameter,
                     std::span<double> values, std::span<const double> analytic,
                     const std::function<double()>& loss) {
  if (values.size() != analytic.size()) {
    throw InputError("gradcheck: analytic gradient size mismatch for " + block + "/" + parameter);
  }
  GradcheckEntry e{block, parameter, 0.0, values.size()};
  const double mid = loss();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    double err = 0.0;
    bool kinked = false;
    // A stencil that straddles a kink of an L1 term is refined; if the kink stays inside,
    // the subgradient is compared with the one-sided slopes.
    for (double h = kGradcheckStep; h >= kGradcheckStep * 1e-2; h *= 0.1) {
      values[i] = keep + h;
      const double up = loss();
      values[i] = keep - h;
      const double down = loss();
      values[i] = keep;
      err = relative_error(analytic[i], (up - down) / (2.0 * h));
      const double fwd = (up - mid) / h;
      const double bwd = (mid - down) / h;
      if (err < kGradcheckTolerance || relative_error(fwd, bwd) < kGradcheckTolerance) {
        break;
      }
      kinked = true;
      err = std::min(relative_error(analytic[i], fwd), relative_error(analytic[i], bwd));
      if (err < kGradcheckTolerance) {
        break;
      }
    }
    e.one_sided += kinked ? 1 : 0;
    e.max_rel_error = std::max(e.max_rel_error, err);
  }
  return e;
}

std::span<double> span_of(Eigen::MatrixXd& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> span_of(const Eigen::MatrixXd& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

void check_attention(Rng& rng, GradcheckReport& r) {
  AttentionBlock block = AttentionBlock::random(3, 4, 4, rng);
  Tensor4 feat = Tensor4::random_normal(1, 4, 3, 3, rng);
  Tensor4 guide = Tensor4::random_normal(1, 3, 6, 6, rng);
  const Tensor4 up = Tensor4::random_normal(1, 4, 3, 3, rng);
  auto loss = [&] { return dot(attention_forward(block, feat, guide), up); };
  const AttentionGrads g = attention_backward(block, feat, guide, up);
  r.entries.push_back(check("attention", "w_q", span_of(block.w_q), span_of(g.w_q), loss));
  r.entries.push_back(check("attention", "w_k", span_of(block.w_k), span_of(g.w_k), loss));
  r.entries.push_back(check("attention", "w_v", span_of(block.w_v), span_of(g.w_v), loss));
  r.entries.push_back(check("attention", "feat_in", feat.data(), g.feat_in.data(), loss));
  r.entries.push_back(check("attention", "guidance", guide.data(), g.guidance.data(), loss));
}

void check_multi_spade(Rng& rng, GradcheckReport& r) {
  MultiSpadeBlock block = MultiSpadeBlock::random(3, 3, 3, 4, rng);
  Tensor4 feat = Tensor4::random_normal(1, 3, 4, 4, rng);
  Tensor4 guide = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  Tensor4 source = Tensor4::random_uniform(1, 3, 4, 4, rng, 0.0, 1.0);
  const Tensor4 up = Tensor4::random_normal(1, 3, 4, 4, rng);
  auto loss = [&] { return dot(multi_spade_forward(block, feat, guide, source), up); };
  MultiSpadeGrads g = multi_spade_backward(block, feat, guide, source, up);
  ParamList values;
  ParamList grads;
  block.collect(values);
  g.params.collect(grads);
  static const char* kNames[] = {"shared.weight", "shared.bias", "eta.weight",
                                 "eta.bias",      "phi.weight",  "phi.bias"};
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::string stage = k < 6 ? "guide." : "source.";
    r.entries.push_back(check("multi_spade", stage + kNames[k % 6], values[k], grads[k], loss));
  }
  r.entries.push_back(check("multi_spade", "feat", feat.data(), g.feat.data(), loss));
  r.entries.push_back(check("multi_spade", "guide", guide.data(), g.guide.data(), loss));
  r.entries.push_back(check("multi_spade", "source", source.data(), g.source.data(), loss));
}

void check_gan(Rng& rng, GradcheckReport& r) {
  std::vector<Tensor4> real;
  std::vector<Tensor4> fake;
  for (int s = 0; s < 3; ++s) {
    real.push_back(Tensor4::random_normal(1, 1, 4 >> s, 4 >> s, rng, 2.0));
    fake.push_back(Tensor4::random_normal(1, 1, 4 >> s, 4 >> s, rng, 2.0));
  }
  const GanLoss g = gan_loss(real, fake);
  for (int s = 0; s < 3; ++s) {
    const std::string tag = "scale" + std::to_string(s);
    r.entries.push_back(check("gan_loss", "loss_d/real." + tag, real[s].data(),
                              g.d_real[s].data(), [&] { return gan_loss(real, fake).loss_d; }));
    r.entries.push_back(check("gan_loss", "loss_d/fake." + tag, fake[s].data(),
                              g.d_fake_d[s].data(), [&] { return gan_loss(real, fake).loss_d; }));
    r.entries.push_back(check("gan_loss", "loss_g/fake." + tag, fake[s].data(),
                              g.d_fake_g[s].data(), [&] { return gan_loss(real, fake).loss_g; }));
  }
}

void check_feature_matching(Rng& rng, GradcheckReport& r) {
  std::vector<Tensor4> real;
  std::vector<Tensor4> fake;
  for (int l = 0; l < 5; ++l) {
    real.push_back(Tensor4::random_normal(1, 2, 4, 4, rng));
    fake.push_back(Tensor4::random_normal(1, 2, 4, 4, rng));
  }
  std::vector<Tensor4> grads;
  feature_matching_loss(real, fake, &grads);
  for (int l = 0; l < 5; ++l) {
    r.entries.push_back(check("feature_matching", "layer" + std::to_string(l), fake[l].data(),
                              grads[l].data(), [&] { return feature_matching_loss(real, fake); }));
  }
}

void check_perceptual(Rng& rng, GradcheckReport& r) {
  const FeatureExtractor extractor = FeatureExtractor::random(3, 4, rng());
  Tensor4 a = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  const Tensor4 b = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  Tensor4 grad;
  perceptual_loss(extractor, a, b, &grad);
  r.entries.push_back(check("perceptual", "image", a.data(), grad.data(),
                            [&] { return perceptual_loss(extractor, a, b); }));
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradcheckFloor});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [&](const GradcheckEntry& e) {
    return std::isfinite(e.max_rel_error) && e.max_rel_error < tolerance;
  });
}

double GradcheckReport::block_error(const std::string& block) const {
  double m = 0.0;
  for (const auto& e : entries) {
    if (e.block == block) {
      m = std::max(m, e.max_rel_error);
    }
  }
  return m;
}

Json GradcheckReport::to_json() const {
  Json blocks = Json::object();
  for (const auto& e : entries) {
    Json& b = blocks[e.block];
    if (!b.contains("max_rel_error")) {
      b["max_rel_error"] = 0.0;
      b["parameters"] = Json::object();
    }
    b["max_rel_error"] = std::max(b["max_rel_error"].get<double>(), e.max_rel_error);
    b["parameters"][e.parameter] = {{"max_rel_error", e.max_rel_error},
                                    {"checked", e.checked},
                                    {"one_sided", e.one_sided}};
  }
  return {{"schema_version", kSchemaVersion},
          {"step", kGradcheckStep},
          {"tolerance", tolerance},
          {"floor", kGradcheckFloor},
          {"passed", passed()},
          {"seconds", seconds},
          {"blocks", blocks}};
}

void GradcheckReport::append(const GradcheckReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  seconds += other.seconds;
}

GradcheckReport gradcheck_neural(std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(seed);
  GradcheckReport r;
  check_attention(rng, r);
  check_multi_spade(rng, r);
  check_gan(rng, r);
  check_feature_matching(rng, r);
  check_perceptual(rng, r);
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

GradcheckReport gradcheck_renderer(int scenes, int size, std::uint64_t seed) {
  const auto t0 = Clock::now();
  GradcheckReport r;
  GradcheckEntry sh_entry{"renderer", "sh", 0.0, 0};
  GradcheckEntry albedo_entry{"renderer", "albedo", 0.0, 0};
  const Camera cam = Camera::orthographic(size, size);
  const RasterConfig raster = RasterConfig::defaults_for(cam);
  for (int s = 0; s < scenes; ++s) {
    Rng rng(seed + static_cast<std::uint64_t>(s));
    const MorphableModel model = make_synthetic_model(5, rng());
    FaceCoefficients coeffs = FaceCoefficients::zeros_for(model);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (Eigen::Index k = 0; k < coeffs.alpha.size(); ++k) {
      coeffs.alpha(k) = normal(rng);
    }
    const Eigen::Quaterniond q(Eigen::AngleAxisd(0.3 * normal(rng), Vec3::UnitY()) *
                               Eigen::AngleAxisd(0.3 * normal(rng), Vec3::UnitX()));
    coeffs.pose.rotation = q.toRotationMatrix();
    coeffs.pose.translation = Vec3(0.1 * normal(rng), 0.1 * normal(rng), 0.0);
    Mesh mesh = evaluate_model(model, coeffs);
    std::uniform_real_distribution<double> uni(0.2, 0.8);
    for (Eigen::Index k = 0; k < mesh.albedo.size(); ++k) {
      mesh.albedo.data()[k] = uni(rng);
    }
    ShCoeffs sh = random_lighting(rng);
    const RenderGradients g = render_with_grads(mesh, cam, sh, raster);
    const FragmentBuffer frags = rasterize(mesh, cam, raster);
    const std::size_t pixels = static_cast<std::size_t>(size) * size;

    for (int c = 0; c < kShChannels; ++c) {
      for (int j = 0; j < kShTerms; ++j) {
        const double keep = sh.coeffs(c, j);
        sh.coeffs(c, j) = keep + kGradcheckStep;
        const std::vector<double> up = shade_unclamped(frags, sh);
        sh.coeffs(c, j) = keep - kGradcheckStep;
        const std::vector<double> down = shade_unclamped(frags, sh);
        sh.coeffs(c, j) = keep;
        for (std::size_t p = 0; p < pixels; ++p) {
          for (int pc = 0; pc < 3; ++pc) {
            const double numeric = (up[3 * p + pc] - down[3 * p + pc]) / (2.0 * kGradcheckStep);
            const double analytic = g.d_pixel_d_sh(p, pc, c * kShTerms + j);
            sh_entry.max_rel_error =
                std::max(sh_entry.max_rel_error, relative_error(analytic, numeric));
            ++sh_entry.checked;
          }
        }
      }
    }

    // Dense analytic albedo Jacobian, column (vertex, channel).
    const int nv = mesh.num_vertices();
    std::vector<double> dense(pixels * 3 * static_cast<std::size_t>(nv) * 3, 0.0);
    auto at = [&](std::size_t p, int pc, int v, int c) -> double& {
      return dense[((p * 3 + pc) * static_cast<std::size_t>(nv) + v) * 3 + c];
    };
    for (std::size_t p = 0; p < pixels; ++p) {
      for (const AlbedoJacobianEntry& e : g.albedo_jacobian(p)) {
        for (int c = 0; c < 3; ++c) {
          at(p, c, e.vertex, c) += e.coefficient(c);
        }
      }
    }
    for (int v = 0; v < nv; ++v) {
      for (int c = 0; c < 3; ++c) {
        const double keep = mesh.albedo(v, c);
        mesh.albedo(v, c) = keep + kGradcheckStep;
        const std::vector<double> up = shade_unclamped(rasterize(mesh, cam, raster), sh);
        mesh.albedo(v, c) = keep - kGradcheckStep;
        const std::vector<double> down = shade_unclamped(rasterize(mesh, cam, raster), sh);
        mesh.albedo(v, c) = keep;
        for (std::size_t p = 0; p < pixels; ++p) {
          for (int pc = 0; pc < 3; ++pc) {
            const double numeric = (up[3 * p + pc] - down[3 * p + pc]) / (2.0 * kGradcheckStep);
            albedo_entry.max_rel_error =
                std::max(albedo_entry.max_rel_error, relative_error(at(p, pc, v, c), numeric));
            ++albedo_entry.checked;
          }
        }
      }
    }
  }
  r.entries.push_back(sh_entry);
  r.entries.push_back(albedo_entry);
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

}  // namespace relit::nn
