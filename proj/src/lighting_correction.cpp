// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/lighting_correction.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

namespace relit {

namespace {

// L1 data term against one image, restricted to covered pixels.
class L1Term {
 public:
  L1Term(const FragmentBuffer& frags, const RasterImage& observed) : frags_(frags), observed_(observed) {
    if (observed.height() != frags.height() || observed.width() != frags.width()) {
      throw InputError("image is " + std::to_string(observed.height()) + "x" +
                       std::to_string(observed.width()) + " but the render target is " +
                       std::to_string(frags.height()) + "x" + std::to_string(frags.width()));
    }
    covered_.reserve(frags.pixel_count());
    for (std::size_t p = 0; p < frags.pixel_count(); ++p) {
      if (1.0 - frags.background_weight(p) >= kCoveredThreshold) {
        covered_.push_back(p);
      }
    }
    if (covered_.empty()) {
      throw InputError("no covered pixels: the mesh does not project into the image");
    }
  }

  [[nodiscard]] double value(const ShCoeffs& sh) const {
    const std::vector<double> raw = shade_unclamped(frags_, sh);
    double sum = 0.0;
    for (std::size_t p : covered_) {
      for (int c = 0; c < 3; ++c) {
        sum += std::abs(std::clamp(raw[3 * p + c], 0.0, 1.0) - observed_.data()[3 * p + c]);
      }
    }
    return sum / (3.0 * static_cast<double>(covered_.size()));
  }

  /// Returns the loss and writes d(loss)/d(sh) scaled by `weight` into `grad`.
  double value_and_gradient(const ShCoeffs& sh, double weight, ShMatrix& grad) const {
    const std::vector<double> raw = shade_unclamped(frags_, sh);
    std::vector<double> upstream(raw.size(), 0.0);
    const double norm = 1.0 / (3.0 * static_cast<double>(covered_.size()));
    double sum = 0.0;
    for (std::size_t p : covered_) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = 3 * p + c;
        const double rendered = std::clamp(raw[i], 0.0, 1.0);
        const double r = rendered - observed_.data()[i];
        sum += std::abs(r);
        const bool passes_clamp = raw[i] >= 0.0 && raw[i] <= 1.0;
        // Subgradient of |r| at 0 is taken as 0.
        const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        upstream[i] = passes_clamp ? weight * norm * sign : 0.0;
      }
    }
    grad = backprop_sh(frags_, sh, upstream);
    return sum * norm;
  }

 private:
  const FragmentBuffer& frags_;
  const RasterImage& observed_;
  std::vector<std::size_t> covered_;
};

class Adam {
 public:
  explicit Adam(const CorrectionConfig& cfg) : cfg_(cfg) {}

  void step(ShMatrix& param, const ShMatrix& grad, ShMatrix& m, ShMatrix& v, int t) const {
    const double lr = learning_rate(t);
    m = cfg_.adam_beta1 * m + (1.0 - cfg_.adam_beta1) * grad;
    v = cfg_.adam_beta2 * v + (1.0 - cfg_.adam_beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t + 1);
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t + 1);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.adam_epsilon);
  }

 private:
  [[nodiscard]] double learning_rate(int t) const {
    const double progress = cfg_.steps > 1 ? static_cast<double>(t) / (cfg_.steps - 1) : 0.0;
    return cfg_.step_size * (1.0 - (1.0 - cfg_.final_step_fraction) * progress);
  }

  CorrectionConfig cfg_;
};

void check_finite(const LossRecord& rec) {
  if (!std::isfinite(rec.total) || !std::isfinite(rec.term_est) || !std::isfinite(rec.term_crt)) {
    throw NumericError("non-finite lighting loss at step " + std::to_string(rec.step));
  }
}

}  // namespace

void CorrectionConfig::validate() const {
  if (!(lambda_crt >= 0.0) || !std::isfinite(lambda_crt)) {
    throw InputError("lambda_crt must be a finite non-negative number");
  }
  if (steps < 0) {
    throw InputError("steps must be non-negative");
  }
  if (!(step_size > 0.0)) {
    throw InputError("step_size must be positive");
  }
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw InputError("Adam betas must lie in (0, 1)");
  }
  if (!(final_step_fraction > 0.0 && final_step_fraction <= 1.0)) {
    throw InputError("final_step_fraction must lie in (0, 1]");
  }
}

CorrectionLoss correction_loss(const Mesh& mesh, const Camera& camera, const RasterConfig& raster,
                               const CorrectionState& state, const RasterImage& input,
                               const RasterImage* target, double lambda_crt) {
  const FragmentBuffer frags = rasterize(mesh, camera, raster);
  CorrectionLoss loss;
  loss.term_est = L1Term(frags, input).value(state.eps_est);
  if (target != nullptr) {
    loss.term_crt = L1Term(frags, *target).value(state.eps_crt());
  }
  loss.total = loss.term_est + lambda_crt * loss.term_crt;
  return loss;
}

ShCoeffs initial_lighting_estimate(const FragmentBuffer& frags, const RasterImage& input) {
  GeometryBuffer g = geometry_buffer(frags, 0.99);
  // Saturated pixels carry no linear information.
  for (std::size_t p = 0; p < frags.pixel_count(); ++p) {
    const Vec3 rgb = input.pixel(p);
    if (rgb.minCoeff() <= 0.0 || rgb.maxCoeff() >= 1.0) {
      g.normals.mask[p] = 0;
    }
  }
  try {
    return estimate_sh(input, g.normals, g.albedo);
  } catch (const std::exception& e) {
    spdlog::warn("lighting initialisation fell back to ambient: {}", e.what());
  }
  // Ambient fallback: band-0 only, matching the mean covered brightness.
  Vec3 sum = Vec3::Zero();
  Vec3 albedo = Vec3::Zero();
  double count = 0.0;
  for (std::size_t p = 0; p < frags.pixel_count(); ++p) {
    if (g.coverage[p] >= kCoveredThreshold) {
      sum += input.pixel(p);
      albedo += g.albedo[p];
      count += 1.0;
    }
  }
  ShCoeffs sh;
  if (count > 0.0) {
    const double y00 = sh_basis_unchecked(Vec3::UnitZ())[0];
    for (int c = 0; c < 3; ++c) {
      sh.coeffs(c, 0) = albedo[c] > 0.0 ? sum[c] / (albedo[c] * y00) : 0.0;
    }
  }
  return sh;
}

CorrectionState fit_lighting(const Mesh& mesh, const Camera& camera, const RasterConfig& raster,
                             const RasterImage& input, const RasterImage* target,
                             const CorrectionConfig& cfg) {
  cfg.validate();
  const FragmentBuffer frags = rasterize(mesh, camera, raster);
  const L1Term est_term(frags, input);
  std::optional<L1Term> crt_term;
  if (target != nullptr) {
    crt_term.emplace(frags, *target);
  }
  const bool use_crt = crt_term.has_value() && cfg.lambda_crt > 0.0;

  CorrectionState state;
  state.eps_est = initial_lighting_estimate(frags, input);
  state.loss_history.reserve(static_cast<std::size_t>(cfg.steps) + 1);

  const Adam adam(cfg);
  ShMatrix m_est = ShMatrix::Zero(), v_est = ShMatrix::Zero();
  ShMatrix m_delta = ShMatrix::Zero(), v_delta = ShMatrix::Zero();

  for (int t = 0; t <= cfg.steps; ++t) {
    LossRecord rec;
    rec.step = t;
    ShMatrix g_est;
    rec.term_est = est_term.value_and_gradient(state.eps_est, 1.0, g_est);
    ShMatrix g_crt = ShMatrix::Zero();
    if (crt_term) {
      rec.term_crt = crt_term->value_and_gradient(state.eps_crt(), cfg.lambda_crt, g_crt);
    }
    rec.total = rec.term_est + cfg.lambda_crt * rec.term_crt;
    check_finite(rec);
    state.loss_history.push_back(rec);
    if (t == cfg.steps) {
      break;
    }
    if (use_crt) {
      g_est += g_crt;
    }
    adam.step(state.eps_est.coeffs, g_est, m_est, v_est, t);
    if (use_crt) {
      adam.step(state.delta_sh.delta, g_crt, m_delta, v_delta, t);
    }
  }
  spdlog::debug("fit_lighting: loss {} -> {}", state.loss_history.front().total,
                state.loss_history.back().total);
  return state;
}

SingleBranchResult single_branch_fit(const Mesh& mesh, const Camera& camera,
                                     const RasterConfig& raster, const RasterImage& target,
                                     const CorrectionConfig& cfg) {
  cfg.validate();
  const FragmentBuffer frags = rasterize(mesh, camera, raster);
  const L1Term term(frags, target);

  SingleBranchResult out;
  out.loss_history.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  const Adam adam(cfg);
  ShMatrix m = ShMatrix::Zero(), v = ShMatrix::Zero();
  for (int t = 0; t <= cfg.steps; ++t) {
    LossRecord rec;
    rec.step = t;
    ShMatrix g;
    rec.term_crt = term.value_and_gradient(out.sh, 1.0, g);
    rec.total = rec.term_crt;
    check_finite(rec);
    out.loss_history.push_back(rec);
    if (t == cfg.steps) {
      break;
    }
    adam.step(out.sh.coeffs, g, m, v, t);
  }
  return out;
}

}  // namespace relit
