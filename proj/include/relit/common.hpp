// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace relit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// V x 3 vertex attribute table, one row per vertex.
using VertexTable = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
/// F x 3 triangle index table.
using FaceTable = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Seeded generator used for every stochastic step in the toolkit.
using Rng = std::mt19937_64;

/// Bad input: malformed files, dimension mismatches, violated preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (rank deficiency, non-finite loss, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kToolkitVersion = "0.3.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace relit
