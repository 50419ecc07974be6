// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>
#include <vector>

#include "relit/neural/losses.hpp"

namespace relit::nn {

/// Which image the generator output is compared with in the perceptual term.
enum class PerceptualReference {
  kInput,   // the degraded input I_s
  kTarget,  // the well-lit target I_t
};

struct DemoConfig {
  int steps = 300;
  int pairs = 4;
  int size = 16;
  int channels = 8;
  double generator_lr = 3e-3;
  double discriminator_lr = 5e-4;
  LossWeights weights;
  PerceptualReference reference = PerceptualReference::kInput;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DemoRecord {
  int step = 0;
  double loss_d = 0.0;
  double gan_g = 0.0;
  double fm = 0.0;
  double percep = 0.0;
  double objective = 0.0;
  /// lambda_fm * fm + lambda_percep * percep.
  double guided = 0.0;
};

/// history[k] is measured before update k; the last entry follows the final update.
struct DemoResult {
  std::vector<DemoRecord> history;
};

/// Small generator (encoder, guidance attention, Multi-SPADE, decoder) against a
/// three-scale patch discriminator on synthetic relighting pairs. Single-threaded, seeded.
DemoResult run_demo_training(const DemoConfig& cfg);

}  // namespace relit::nn
