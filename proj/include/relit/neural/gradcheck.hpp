// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relit/model_io.hpp"

namespace relit::nn {

inline constexpr double kGradcheckStep = 1e-4;
inline constexpr double kGradcheckTolerance = 1e-3;
/// Denominator floor so that entries that are zero on both sides compare as equal.
inline constexpr double kGradcheckFloor = 1e-4;

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric);

struct GradcheckEntry {
  std::string block;
  std::string parameter;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose central stencil straddled a kink (forward and backward differences
  /// disagree). Their step is refined down to step / 100 and the analytic value is also
  /// accepted when it matches a one-sided difference.
  std::size_t one_sided = 0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = kGradcheckTolerance;
  double seconds = 0.0;

  [[nodiscard]] bool passed() const;
  /// Largest error over all entries of `block`; 0 when absent.
  [[nodiscard]] double block_error(const std::string& block) const;
  [[nodiscard]] Json to_json() const;
  void append(const GradcheckReport& other);
};

/// Central differences on seeded toy shapes for attention, Multi-SPADE, the GAN loss, the
/// feature matching loss and the perceptual loss.
GradcheckReport gradcheck_neural(std::uint64_t seed);

/// Central differences of unclamped pixels w.r.t. SH and per-vertex albedo on random scenes.
GradcheckReport gradcheck_renderer(int scenes, int size, std::uint64_t seed);

}  // namespace relit::nn
