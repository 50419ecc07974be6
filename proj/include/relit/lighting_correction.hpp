// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>
#include <vector>

#include "relit/image.hpp"
#include "relit/morphable_model.hpp"
#include "relit/sh_lighting.hpp"
#include "relit/soft_rasterizer.hpp"

namespace relit {

struct CorrectionConfig {
  double lambda_crt = 1.0;
  int steps = 2000;
  double step_size = 2e-2;
  double adam_beta1 = 0.95;
  double adam_beta2 = 0.90;
  double adam_epsilon = 1e-8;
  /// The step size decays linearly from step_size to step_size * final_step_fraction.
  double final_step_fraction = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossRecord {
  int step = 0;
  double total = 0.0;
  double term_est = 0.0;
  double term_crt = 0.0;
};

/// Bi-branch lighting variables. The corrected lighting is always derived, never stored.
struct CorrectionState {
  ShCoeffs eps_est;
  ShDelta delta_sh;
  std::vector<LossRecord> loss_history;

  [[nodiscard]] ShCoeffs eps_crt() const { return eps_est + delta_sh; }
};

struct CorrectionLoss {
  double total = 0.0;
  double term_est = 0.0;
  double term_crt = 0.0;
};

/// Pixels whose rendered coverage reaches this value take part in the L1 means.
inline constexpr double kCoveredThreshold = 0.5;

/// L1 objective over covered pixels, averaged per pixel and channel:
///   total = |render(eps_est) - I_s| + lambda_crt * |render(eps_est + delta) - I_t|.
/// `target` may be null, in which case the correction term is 0.
CorrectionLoss correction_loss(const Mesh& mesh, const Camera& camera, const RasterConfig& raster,
                               const CorrectionState& state, const RasterImage& input,
                               const RasterImage* target, double lambda_crt);

/// Adam on (eps_est, delta_sh). eps_est starts from estimate_sh on the input with normals and
/// albedo from the rendered geometry; delta_sh starts at zero. loss_history holds steps + 1
/// records: entry t is the loss after t updates.
CorrectionState fit_lighting(const Mesh& mesh, const Camera& camera, const RasterConfig& raster,
                             const RasterImage& input, const RasterImage* target,
                             const CorrectionConfig& cfg);

struct SingleBranchResult {
  ShCoeffs sh;
  std::vector<LossRecord> loss_history;
};

/// Ablation baseline: one lighting vector fitted against the target only, starting from zero
/// lighting. term_est of every history record is 0.
SingleBranchResult single_branch_fit(const Mesh& mesh, const Camera& camera,
                                     const RasterConfig& raster, const RasterImage& target,
                                     const CorrectionConfig& cfg);

/// Initial lighting guess used by fit_lighting.
ShCoeffs initial_lighting_estimate(const FragmentBuffer& frags, const RasterImage& input);

}  // namespace relit
