// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include <gtest/gtest.h>

#include <numbers>

#include "relit/sh_lighting.hpp"
#include "test_support.hpp"

namespace relit {
namespace {

using testing::fibonacci_sphere;

// Real SH written out from the Cartesian polynomials, independent of the library table.
ShBasis reference_basis(const Vec3& n) {
  const double pi = std::numbers::pi;
  const double x = n.x(), y = n.y(), z = n.z();
  ShBasis b;
  b << 0.5 * std::sqrt(1 / pi), std::sqrt(3 / (4 * pi)) * y, std::sqrt(3 / (4 * pi)) * z,
      std::sqrt(3 / (4 * pi)) * x, 0.5 * std::sqrt(15 / pi) * x * y,
      0.5 * std::sqrt(15 / pi) * y * z, 0.25 * std::sqrt(5 / pi) * (3 * z * z - 1),
      0.5 * std::sqrt(15 / pi) * x * z, 0.25 * std::sqrt(15 / pi) * (x * x - y * y);
  return b;
}

TEST(ShBasis, BandZeroConstant) {
  EXPECT_NEAR(sh_basis(Vec3::UnitZ())(0), 0.2820948, 1e-7);
  // Y00^2 integrates to one over the sphere (Monte Carlo on a spiral lattice).
  const auto pts = fibonacci_sphere(20000);
  double integral = 0.0;
  for (const Vec3& p : pts) {
    integral += sh_basis(p)(0) * sh_basis(p)(0);
  }
  EXPECT_NEAR(integral * 4 * std::numbers::pi / pts.size(), 1.0, 1e-9);
  for (const Vec3& p : fibonacci_sphere(50)) {
    EXPECT_EQ(sh_basis(p)(0), sh_basis(Vec3::UnitX())(0));
  }
}

TEST(ShBasis, MatchesCartesianForms) {
  for (const Vec3& p : fibonacci_sphere(100)) {
    EXPECT_LT((sh_basis(p) - reference_basis(p)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(ShBasis, Parity) {
  for (const Vec3& p : fibonacci_sphere(40)) {
    const ShBasis a = sh_basis(p);
    const ShBasis b = sh_basis(-p);
    EXPECT_EQ(a(0), b(0));
    for (int j = 1; j < 4; ++j) EXPECT_NEAR(a(j), -b(j), 1e-15);
    for (int j = 4; j < 9; ++j) EXPECT_NEAR(a(j), b(j), 1e-15);
  }
}

TEST(ShBasis, RejectsNonUnitNormal) {
  EXPECT_THROW(sh_basis(Vec3(0, 0, 1.1)), InputError);
  EXPECT_THROW(sh_basis(Vec3::Zero()), InputError);
}

TEST(ShBasis, OrthonormalUnderUniformSampling) {
  const auto pts = fibonacci_sphere(100000);
  Eigen::Matrix<double, 9, 9> gram = Eigen::Matrix<double, 9, 9>::Zero();
  for (const Vec3& p : pts) {
    const ShBasis b = sh_basis(p);
    gram += b * b.transpose();
  }
  gram *= 4 * std::numbers::pi / pts.size();
  EXPECT_LT((gram - Eigen::Matrix<double, 9, 9>::Identity()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Shade, BandZeroOnlyIsUniform) {
  ShBasis t = ShBasis::Zero();
  t(0) = 1.7;
  const ShCoeffs sh = ShCoeffs::gray(t);
  const Vec3 a(0.3, 0.4, 0.5);
  const Vec3 ref = shade(Vec3::UnitZ(), a, sh);
  for (const Vec3& p : fibonacci_sphere(30)) {
    EXPECT_NEAR((shade(p, a, sh) - ref).norm(), 0.0, 1e-15);
  }
}

TEST(Shade, ZeroAlbedoIsBlack) {
  Rng rng(1);
  const ShCoeffs sh = testing::positive_lighting(rng);
  EXPECT_EQ(shade(Vec3::UnitY(), Vec3::Zero(), sh), Vec3::Zero());
}

TEST(Shade, DirectionalLightFloorsFacingAway) {
  // Projection of a delta light along d: coefficients Y_j(d); no band-0 offset.
  const Vec3 d = Vec3(1, 2, 2).normalized();
  ShBasis t = sh_basis(d);
  t(0) = 0.0;
  for (int j = 4; j < 9; ++j) t(j) = 0.0;
  const ShCoeffs sh = ShCoeffs::gray(t);
  const Vec3 facing = shade(d, Vec3::Ones(), sh);
  const Vec3 away = shade(-d, Vec3::Ones(), sh);
  const double raw_away = sh_basis(-d).dot(t);
  ASSERT_LT(raw_away, 0.0);
  EXPECT_GT(facing.minCoeff(), 0.0);
  EXPECT_EQ(away, Vec3::Zero());
}

NormalMap map_from(const std::vector<Vec3>& pts) {
  NormalMap nm(1, static_cast<int>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    nm.normals[i] = pts[i];
    nm.mask[i] = 1;
  }
  return nm;
}

RasterImage shaded(const NormalMap& nm, const ShCoeffs& sh, const std::vector<Vec3>& albedo) {
  RasterImage img(nm.height, nm.width);
  for (std::size_t i = 0; i < nm.normals.size(); ++i) {
    img.set_pixel(i, shade(nm.normals[i], albedo.empty() ? Vec3::Ones() : albedo[i], sh));
  }
  return img;
}

TEST(EstimateSh, RoundTripNoClamp) {
  Rng rng(11);
  const ShCoeffs truth = testing::positive_lighting(rng, 0.5, 0.05);
  const auto pts = fibonacci_sphere(256);
  const NormalMap nm = map_from(pts);
  const RasterImage img = shaded(nm, truth, {});
  ASSERT_LT(*std::max_element(img.data().begin(), img.data().end()), 1.0);
  ASSERT_GT(*std::min_element(img.data().begin(), img.data().end()), 0.0);
  const ShCoeffs est = estimate_sh(img, nm);
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 9; ++j) {
      EXPECT_NEAR(est.coeffs(c, j), truth.coeffs(c, j), 1e-6 * std::abs(truth.coeffs(c, j)) + 1e-12);
    }
  }
}

TEST(EstimateSh, ConstantImageIsBandZero) {
  const auto pts = fibonacci_sphere(2000);
  const NormalMap nm = map_from(pts);
  RasterImage img(1, static_cast<int>(pts.size()), Vec3::Constant(0.5));
  const ShCoeffs est = estimate_sh(img, nm);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(est.coeffs(c, 0), 0.5 / sh_basis(Vec3::UnitZ())(0), 1e-9);
    for (int j = 1; j < 9; ++j) EXPECT_LT(std::abs(est.coeffs(c, j)), 1e-6);
  }
}

TEST(EstimateSh, Errors) {
  const auto pts = fibonacci_sphere(8);
  EXPECT_THROW(estimate_sh(RasterImage(1, 8), map_from(pts)), InputError);
  std::vector<Vec3> same(50, Vec3::UnitZ());
  EXPECT_THROW(estimate_sh(RasterImage(1, 50, Vec3::Constant(0.3)), map_from(same)), NumericError);
}

TEST(EstimateSh, UsesPerPixelAlbedo) {
  Rng rng(5);
  const ShCoeffs truth = testing::positive_lighting(rng, 0.6, 0.05);
  const auto pts = fibonacci_sphere(300);
  std::vector<Vec3> albedo;
  std::uniform_real_distribution<double> uni(0.3, 0.9);
  for (std::size_t i = 0; i < pts.size(); ++i) albedo.emplace_back(uni(rng), uni(rng), uni(rng));
  const NormalMap nm = map_from(pts);
  const ShCoeffs est = estimate_sh(shaded(nm, truth, albedo), nm, albedo);
  EXPECT_LT(est.max_abs_diff(truth), 1e-9);
}

// Properties ------------------------------------------------------------------------------

TEST(ShProperties, ShadeIsHomogeneousBeforeClamp) {
  Rng rng(2);
  const ShCoeffs sh = testing::positive_lighting(rng, 0.3, 0.02);
  ShCoeffs scaled = sh;
  scaled.coeffs *= 1.7;
  for (const Vec3& p : fibonacci_sphere(50)) {
    const Vec3 a = shade_irradiance(sh_basis(p), sh);
    const Vec3 b = shade_irradiance(sh_basis(p), scaled);
    EXPECT_LT((b - 1.7 * a).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(ShProperties, EstimateInvertsShadeAcrossSeeds) {
  const auto pts = fibonacci_sphere(400);
  const NormalMap nm = map_from(pts);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const ShCoeffs truth = testing::positive_lighting(rng, 0.8, 0.08);
    EXPECT_LT(estimate_sh(shaded(nm, truth, {}), nm).max_abs_diff(truth), 1e-9) << seed;
  }
}

TEST(ShDelta, AddsEntrywise) {
  ShCoeffs a;
  a.coeffs.setConstant(1.0);
  ShDelta d;
  d.delta.setConstant(0.25);
  EXPECT_EQ((a + d).coeffs, ShMatrix::Constant(1.25));
}

}  // namespace
}  // namespace relit
