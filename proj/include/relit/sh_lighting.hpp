// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "relit/common.hpp"

namespace relit {

class RasterImage;

inline constexpr int kShTerms = 9;
inline constexpr int kShChannels = 3;
inline constexpr int kShCount = kShTerms * kShChannels;

using ShBasis = Eigen::Matrix<double, kShTerms, 1>;
using ShMatrix = Eigen::Matrix<double, kShChannels, kShTerms, Eigen::RowMajor>;

struct ShDelta;

/// Second-order lighting: one 9-vector per RGB channel, terms ordered
/// [Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22].
struct ShCoeffs {
  ShMatrix coeffs = ShMatrix::Zero();

  ShCoeffs() = default;
  explicit ShCoeffs(const ShMatrix& m) : coeffs(m) {}

  /// Same 9-vector on every channel.
  static ShCoeffs gray(const ShBasis& terms);

  [[nodiscard]] bool all_finite() const { return coeffs.allFinite(); }
  [[nodiscard]] double max_abs_diff(const ShCoeffs& other) const {
    return (coeffs - other.coeffs).cwiseAbs().maxCoeff();
  }
};

/// Additive lighting correction; corrected = estimated + delta.
struct ShDelta {
  ShMatrix delta = ShMatrix::Zero();

  ShDelta() = default;
  explicit ShDelta(const ShMatrix& m) : delta(m) {}
};

inline ShCoeffs operator+(const ShCoeffs& sh, const ShDelta& d) {
  return ShCoeffs(sh.coeffs + d.delta);
}

/// Real SH basis at a unit direction. Throws InputError when |n| deviates from 1 by > 1e-6.
ShBasis sh_basis(const Vec3& normal);

/// Frontal test lighting: strong ambient term, a random directional lobe, weak second order.
ShCoeffs random_lighting(Rng& rng);

/// Unvalidated variant for inner loops that already guarantee unit normals.
ShBasis sh_basis_unchecked(const Vec3& normal);

/// albedo * max(0, <sh_c, Y(n)>) per channel, clamped to [0,1].
Vec3 shade(const Vec3& normal, const Vec3& albedo, const ShCoeffs& sh);

/// max(0, <sh_c, Y(n)>) per channel without the upper clamp.
Vec3 shade_irradiance(const ShBasis& basis, const ShCoeffs& sh);

/// Per-pixel unit normals with a validity mask, row-major H x W.
struct NormalMap {
  int height = 0;
  int width = 0;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> mask;

  NormalMap() = default;
  NormalMap(int h, int w)
      : height(h), width(w), normals(static_cast<std::size_t>(h) * w, Vec3::UnitZ()),
        mask(static_cast<std::size_t>(h) * w, 0) {}

  [[nodiscard]] std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  [[nodiscard]] std::size_t masked_count() const;
};

/// Linear least-squares lighting fit: for each channel solves rows Y(n_p) * albedo_p against the
/// observed intensities over masked pixels with column-pivoted QR. `albedo` may be empty (taken
/// as 1) or hold one RGB triple per pixel.
///
/// Throws InputError for fewer than 9 masked pixels or mismatched sizes, NumericError when the
/// normals do not span the 9 basis functions.
ShCoeffs estimate_sh(const RasterImage& image, const NormalMap& normals,
                     std::span<const Vec3> albedo = {});

}  // namespace relit
