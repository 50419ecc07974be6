// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relit/image.hpp"
#include "relit/model_io.hpp"
#include "relit/morphable_model.hpp"
#include "relit/sh_lighting.hpp"
#include "relit/soft_rasterizer.hpp"

namespace relit {

struct DegradeConfig {
  /// Extrapolation factor range; must lie inside [1, 2].
  double lambda_lo = 1.0;
  double lambda_hi = 2.0;
  /// Radius of the L2 ball (over all 27 coefficients) around the mean lighting from which the
  /// ideal point is drawn. Unset means 0.1 * ||mean||_2.
  std::optional<double> ideal_radius;
  double blur_max_sigma = 2.0;
  double noise_max_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] double resolved_radius(const ShCoeffs& mean) const;
  [[nodiscard]] Json to_json() const;
  static DegradeConfig from_json(const Json& doc);
};

/// Entrywise mean of the target lightings. Throws InputError on an empty list.
ShCoeffs mean_sh(std::span<const ShCoeffs> targets);

struct DegradedLighting {
  ShCoeffs sh_input;
  double lambda_used = 1.0;
  ShCoeffs ideal_point;
};

/// Draws an ideal point uniformly in the ball around `mean`, then lambda uniformly in
/// [lambda_lo, lambda_hi], and extrapolates sh_target away from the ideal point:
///   sh_input = sh_target + lambda * (sh_target - ideal).
DegradedLighting degrade_sh(const ShCoeffs& sh_target, const ShCoeffs& mean,
                            const DegradeConfig& cfg, Rng& rng);

/// Shading ratios below this are floored in the reshading denominator.
inline constexpr double kShadingFloor = 1e-3;

/// Per masked pixel and channel: I_s = I_t * shade(n, 1, sh_input) / max(shade(n, 1, sh_target),
/// floor), clamped to [0,1]. Equal numerator and denominator leave the pixel untouched.
/// Unmasked pixels are copied.
RasterImage reshade_image(const RasterImage& target, const NormalMap& normals,
                          const ShCoeffs& sh_target, const ShCoeffs& sh_input);

/// Grey shading map (channel mean of shade(n, 1, sh)) on masked pixels, 1 elsewhere.
ScalarMap shading_map(const NormalMap& normals, const ShCoeffs& sh);

/// Spatially varying Gaussian blur with sigma = blur_max * (1 - 3x3 mean shading) followed by
/// additive Gaussian noise with sigma = noise_max * (1 - shading), clamped to [0,1].
RasterImage apply_darkness_degradation(const RasterImage& image, const ScalarMap& shading,
                                       const DegradeConfig& cfg, Rng& rng);

struct PairProvenance {
  std::uint64_t seed = 0;
  DegradeConfig config;
  double lambda_used = 1.0;
  ShCoeffs ideal_point;
  double resolved_radius = 0.0;
};

struct TrainingPair {
  RasterImage input;
  RasterImage target;
  ShCoeffs sh_input;
  ShCoeffs sh_target;
  PairProvenance provenance;
};

/// Reshades an existing target image using geometry normals (mask = valid normals).
TrainingPair build_pair_from_image(const RasterImage& target, const NormalMap& normals,
                                   const ShCoeffs& sh_target, const ShCoeffs& mean,
                                   const DegradeConfig& cfg, Rng& rng);

/// Renders the target from the model, then degrades it.
TrainingPair build_pair(const MorphableModel& model, const FaceCoefficients& coeffs,
                        const Camera& camera, const RasterConfig& raster,
                        const ShCoeffs& sh_target, const ShCoeffs& mean,
                        const DegradeConfig& cfg, Rng& rng);

/// Automatic screening: a pair passes when the masked mean brightness of its input is at
/// least min_brightness.
bool passes_brightness_filter(const TrainingPair& pair, const NormalMap& normals,
                              double min_brightness = 0.02);

/// Per-pair generator seed derived from the run seed.
inline std::uint64_t pair_seed(std::uint64_t seed, std::uint64_t index) { return seed ^ index; }

}  // namespace relit
