// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "relit/common.hpp"

namespace relit {

/// Linear face model: shape = mean + B_id * alpha + B_exp * beta, albedo = mean + B_tex * zeta.
///
/// Basis matrices have 3V rows laid out vertex-major (x0, y0, z0, x1, ...), one column per
/// coefficient.
struct MorphableModel {
  VertexTable mean_shape;
  VertexTable mean_albedo;
  Eigen::MatrixXd basis_id;
  Eigen::MatrixXd basis_exp;
  Eigen::MatrixXd basis_tex;
  FaceTable faces;

  [[nodiscard]] int num_vertices() const { return static_cast<int>(mean_shape.rows()); }
  [[nodiscard]] int num_faces() const { return static_cast<int>(faces.rows()); }
  [[nodiscard]] int num_id() const { return static_cast<int>(basis_id.cols()); }
  [[nodiscard]] int num_exp() const { return static_cast<int>(basis_exp.cols()); }
  [[nodiscard]] int num_tex() const { return static_cast<int>(basis_tex.cols()); }

  /// Throws InputError if shapes disagree, a face index is out of range, or the mean albedo
  /// leaves [0,1].
  void validate() const;
};

/// Rigid transform applied to the evaluated mesh: p' = rotation * p + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  /// Builds a pose from a (w, x, y, z) quaternion; the quaternion is normalized first.
  static Pose from_quaternion(double w, double x, double y, double z, const Vec3& t = Vec3::Zero());

  /// Throws InputError unless the rotation is orthonormal with determinant +1 (tolerance 1e-6).
  void validate() const;
};

struct FaceCoefficients {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd zeta;
  Pose pose;

  /// All-zero coefficients sized for `model`, identity pose.
  static FaceCoefficients zeros_for(const MorphableModel& model);
};

struct Mesh {
  VertexTable positions;
  VertexTable albedo;
  VertexTable normals;
  FaceTable faces;

  [[nodiscard]] int num_vertices() const { return static_cast<int>(positions.rows()); }
  [[nodiscard]] int num_faces() const { return static_cast<int>(faces.rows()); }
  [[nodiscard]] bool empty() const { return faces.rows() == 0; }
};

Mesh evaluate_model(const MorphableModel& model, const FaceCoefficients& coeffs);

/// Area-weighted vertex normals. Vertices with no non-degenerate incident face receive the
/// normalized sum of all face normals (or +z if that sum vanishes too).
VertexTable compute_vertex_normals(const VertexTable& positions, const FaceTable& faces);

struct SyntheticModelOptions {
  int num_id = 10;
  int num_exp = 5;
  int num_tex = 10;
};

/// Deterministic sphere-patch "face blob" facing +z with random orthogonal bases.
/// Grid of n x n vertices, two triangles per quad, counter-clockwise seen from +z.
MorphableModel make_synthetic_model(int num_vertices_per_axis, std::uint64_t seed,
                                    const SyntheticModelOptions& options = {});

}  // namespace relit
