// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/sh_lighting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/QR>

#include "relit/image.hpp"

namespace relit {

namespace {

const double kY00 = 0.5 / std::sqrt(std::numbers::pi);
const double kY1 = std::sqrt(3.0 / (4.0 * std::numbers::pi));
const double kY2 = 0.5 * std::sqrt(15.0 / std::numbers::pi);
const double kY20 = 0.25 * std::sqrt(5.0 / std::numbers::pi);
const double kY22 = 0.25 * std::sqrt(15.0 / std::numbers::pi);

}  // namespace

ShCoeffs ShCoeffs::gray(const ShBasis& terms) {
  ShCoeffs sh;
  for (int c = 0; c < kShChannels; ++c) {
    sh.coeffs.row(c) = terms.transpose();
  }
  return sh;
}

ShCoeffs random_lighting(Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 dir(normal(rng), normal(rng), std::abs(normal(rng)) + 0.5);
  dir.normalize();
  const double ambient = 2.2 + 0.6 * uni(rng);
  const double lobe = 0.3 + 0.5 * uni(rng);
  ShBasis terms;
  terms << ambient, lobe * dir.y(), lobe * dir.z(), lobe * dir.x(), 0, 0, 0, 0, 0;
  for (int j = 4; j < kShTerms; ++j) {
    terms(j) = 0.2 * (uni(rng) - 0.5);
  }
  ShCoeffs sh = ShCoeffs::gray(terms);
  for (int c = 0; c < kShChannels; ++c) {
    sh.coeffs(c, 0) += 0.15 * (uni(rng) - 0.5);
  }
  return sh;
}

ShBasis sh_basis_unchecked(const Vec3& n) {
  const double x = n.x();
  const double y = n.y();
  const double z = n.z();
  ShBasis b;
  b << kY00, kY1 * y, kY1 * z, kY1 * x, kY2 * x * y, kY2 * y * z, kY20 * (3.0 * z * z - 1.0),
      kY2 * x * z, kY22 * (x * x - y * y);
  return b;
}

ShBasis sh_basis(const Vec3& normal) {
  const double len = normal.norm();
  if (!std::isfinite(len) || std::abs(len - 1.0) > 1e-6) {
    throw InputError("sh_basis expects a unit normal, got length " + std::to_string(len));
  }
  return sh_basis_unchecked(normal);
}

Vec3 shade_irradiance(const ShBasis& basis, const ShCoeffs& sh) {
  Vec3 out;
  for (int c = 0; c < kShChannels; ++c) {
    out[c] = std::max(0.0, sh.coeffs.row(c).dot(basis.transpose()));
  }
  return out;
}

Vec3 shade(const Vec3& normal, const Vec3& albedo, const ShCoeffs& sh) {
  const Vec3 irradiance = shade_irradiance(sh_basis(normal), sh);
  return albedo.cwiseProduct(irradiance).cwiseMax(0.0).cwiseMin(1.0);
}

std::size_t NormalMap::masked_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(),
                                                [](std::uint8_t m) { return m != 0; }));
}

ShCoeffs estimate_sh(const RasterImage& image, const NormalMap& normals,
                     std::span<const Vec3> albedo) {
  if (image.height() != normals.height || image.width() != normals.width) {
    throw InputError("estimate_sh: image is " + std::to_string(image.height()) + "x" +
                     std::to_string(image.width()) + " but normal map is " +
                     std::to_string(normals.height) + "x" + std::to_string(normals.width));
  }
  const std::size_t pixels = static_cast<std::size_t>(normals.height) * normals.width;
  if (!albedo.empty() && albedo.size() != pixels) {
    throw InputError("estimate_sh: albedo map has " + std::to_string(albedo.size()) +
                     " entries, expected " + std::to_string(pixels));
  }
  const std::size_t rows = normals.masked_count();
  if (rows < static_cast<std::size_t>(kShTerms)) {
    throw InputError("estimate_sh needs at least 9 masked pixels, got " + std::to_string(rows));
  }

  Eigen::MatrixXd basis(static_cast<Eigen::Index>(rows), kShTerms);
  std::vector<std::size_t> used;
  used.reserve(rows);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (normals.mask[p] == 0) {
      continue;
    }
    basis.row(static_cast<Eigen::Index>(used.size())) = sh_basis(normals.normals[p]).transpose();
    used.push_back(p);
  }

  ShCoeffs out;
  for (int c = 0; c < kShChannels; ++c) {
    Eigen::MatrixXd a = basis;
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < used.size(); ++r) {
      const std::size_t p = used[r];
      const auto i = static_cast<Eigen::Index>(r);
      if (!albedo.empty()) {
        a.row(i) *= albedo[p][c];
      }
      b[i] = image.pixel(p)[c];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < kShTerms) {
      throw NumericError("estimate_sh: lighting system for channel " + std::to_string(c) +
                         " is rank deficient (rank " + std::to_string(qr.rank()) +
                         " < 9); masked normals do not span the SH basis");
    }
    out.coeffs.row(c) = qr.solve(b).transpose();
  }
  return out;
}

}  // namespace relit
