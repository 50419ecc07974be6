// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/morphable_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/QR>

namespace relit {

namespace {

void check_basis(const Eigen::MatrixXd& basis, int num_vertices, const char* name) {
  if (basis.rows() != 3 * num_vertices && basis.cols() > 0) {
    throw InputError(std::string(name) + " has " + std::to_string(basis.rows()) +
                     " rows, expected 3 * num_vertices = " + std::to_string(3 * num_vertices));
  }
}

void check_coefficients(const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& basis,
                        const char* coeff_name, const char* basis_name) {
  if (coeffs.size() != basis.cols()) {
    throw InputError(std::string(coeff_name) + " has " + std::to_string(coeffs.size()) +
                     " entries but " + basis_name + " has " + std::to_string(basis.cols()) +
                     " columns");
  }
}

// Adds basis * coeffs (3V vector, vertex-major) onto a V x 3 table.
void accumulate(VertexTable& table, const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() == 0) {
    return;
  }
  const Eigen::VectorXd offset = basis * coeffs;
  table += Eigen::Map<const VertexTable>(offset.data(), table.rows(), 3);
}

// Smooth random field over the (u, v) grid, one 3-vector per vertex, flattened vertex-major.
Eigen::VectorXd smooth_field(const Eigen::MatrixX2d& uv, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Eigen::VectorXd field = Eigen::VectorXd::Zero(3 * uv.rows());
  constexpr int kWaves = 4;
  for (int w = 0; w < kWaves; ++w) {
    const double fu = normal(rng) * 1.5;
    const double fv = normal(rng) * 1.5;
    const double ph = phase(rng);
    const Vec3 amplitude(normal(rng), normal(rng), normal(rng));
    for (Eigen::Index i = 0; i < uv.rows(); ++i) {
      const double s = std::cos(fu * uv(i, 0) + fv * uv(i, 1) + ph);
      field.segment<3>(3 * i) += s * amplitude;
    }
  }
  return field;
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixX2d& uv, int columns, Rng& rng) {
  const Eigen::Index rows = 3 * uv.rows();
  if (columns > rows) {
    throw InputError("synthetic basis with " + std::to_string(columns) +
                     " columns needs at least that many rows, got " + std::to_string(rows));
  }
  if (columns == 0) {
    return Eigen::MatrixXd(rows, 0);
  }
  Eigen::MatrixXd raw(rows, columns);
  for (int c = 0; c < columns; ++c) {
    raw.col(c) = smooth_field(uv, rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, columns);
}

}  // namespace

void MorphableModel::validate() const {
  const int v = num_vertices();
  if (mean_albedo.rows() != v) {
    throw InputError("mean_albedo has " + std::to_string(mean_albedo.rows()) +
                     " rows, mean_shape has " + std::to_string(v));
  }
  check_basis(basis_id, v, "basis_id");
  check_basis(basis_exp, v, "basis_exp");
  check_basis(basis_tex, v, "basis_tex");
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces(f, k) < 0 || faces(f, k) >= v) {
        throw InputError("face " + std::to_string(f) + " references vertex " +
                         std::to_string(faces(f, k)) + " outside [0, " + std::to_string(v) + ")");
      }
    }
  }
  if (v > 0 && (mean_albedo.minCoeff() < 0.0 || mean_albedo.maxCoeff() > 1.0)) {
    throw InputError("mean_albedo entries must lie in [0,1]");
  }
}

Pose Pose::from_quaternion(double w, double x, double y, double z, const Vec3& t) {
  Eigen::Quaterniond q(w, x, y, z);
  if (q.norm() == 0.0) {
    throw InputError("zero quaternion is not a rotation");
  }
  q.normalize();
  Pose pose;
  pose.rotation = q.toRotationMatrix();
  pose.translation = t;
  return pose;
}

void Pose::validate() const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!std::isfinite(ortho) || ortho > 1e-6 || std::abs(det - 1.0) > 1e-6) {
    throw InputError("pose rotation must be orthonormal with determinant +1");
  }
  if (!translation.allFinite()) {
    throw InputError("pose translation must be finite");
  }
}

FaceCoefficients FaceCoefficients::zeros_for(const MorphableModel& model) {
  FaceCoefficients c;
  c.alpha = Eigen::VectorXd::Zero(model.num_id());
  c.beta = Eigen::VectorXd::Zero(model.num_exp());
  c.zeta = Eigen::VectorXd::Zero(model.num_tex());
  return c;
}

Mesh evaluate_model(const MorphableModel& model, const FaceCoefficients& coeffs) {
  model.validate();
  check_coefficients(coeffs.alpha, model.basis_id, "alpha", "basis_id");
  check_coefficients(coeffs.beta, model.basis_exp, "beta", "basis_exp");
  check_coefficients(coeffs.zeta, model.basis_tex, "zeta", "basis_tex");
  coeffs.pose.validate();

  Mesh mesh;
  mesh.faces = model.faces;

  VertexTable shape = model.mean_shape;
  accumulate(shape, model.basis_id, coeffs.alpha);
  accumulate(shape, model.basis_exp, coeffs.beta);
  mesh.positions.resize(shape.rows(), 3);
  for (Eigen::Index i = 0; i < shape.rows(); ++i) {
    mesh.positions.row(i) =
        (coeffs.pose.rotation * shape.row(i).transpose() + coeffs.pose.translation).transpose();
  }

  mesh.albedo = model.mean_albedo;
  accumulate(mesh.albedo, model.basis_tex, coeffs.zeta);
  mesh.albedo = mesh.albedo.cwiseMax(0.0).cwiseMin(1.0);

  mesh.normals = compute_vertex_normals(mesh.positions, mesh.faces);
  return mesh;
}

VertexTable compute_vertex_normals(const VertexTable& positions, const FaceTable& faces) {
  VertexTable accum = VertexTable::Zero(positions.rows(), 3);
  Vec3 total = Vec3::Zero();
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Vec3 p0 = positions.row(faces(f, 0));
    const Vec3 p1 = positions.row(faces(f, 1));
    const Vec3 p2 = positions.row(faces(f, 2));
    // Cross product length is twice the area, so summing it weights by area.
    const Vec3 n = (p1 - p0).cross(p2 - p0);
    total += n;
    for (int k = 0; k < 3; ++k) {
      accum.row(faces(f, k)) += n.transpose();
    }
  }
  const Vec3 fallback = total.norm() > 0.0 ? Vec3(total.normalized()) : Vec3::UnitZ();

  VertexTable normals(positions.rows(), 3);
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    const Vec3 n = accum.row(i);
    const double len = n.norm();
    if (len > 1e-300 && std::isfinite(len)) {
      normals.row(i) = (n / len).transpose();
    } else {
      normals.row(i) = fallback.transpose();
    }
  }
  return normals;
}

MorphableModel make_synthetic_model(int num_vertices_per_axis, std::uint64_t seed,
                                    const SyntheticModelOptions& options) {
  const int n = num_vertices_per_axis;
  if (n < 3) {
    throw InputError("num_vertices_per_axis must be >= 3, got " + std::to_string(n));
  }
  constexpr double kHalfLongitude = 80.0 * std::numbers::pi / 180.0;
  constexpr double kHalfLatitude = 70.0 * std::numbers::pi / 180.0;

  const int v = n * n;
  MorphableModel model;
  model.mean_shape.resize(v, 3);
  model.mean_albedo.resize(v, 3);
  Eigen::MatrixX2d uv(v, 2);

  const Vec3 skin(0.78, 0.58, 0.47);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int i = r * n + c;
      const double u = -1.0 + 2.0 * c / (n - 1);
      const double w = 1.0 - 2.0 * r / (n - 1);  // row 0 at the top (+y)
      uv(i, 0) = u;
      uv(i, 1) = w;
      const double lon = u * kHalfLongitude;
      const double lat = w * kHalfLatitude;
      model.mean_shape.row(i) << std::cos(lat) * std::sin(lon), std::sin(lat),
          std::cos(lat) * std::cos(lon);
      // Mild smooth tint: warmer toward the cheeks, slightly darker toward the rim.
      const double rim = 0.08 * (u * u + w * w);
      const double cheek = 0.05 * std::exp(-8.0 * ((std::abs(u) - 0.5) * (std::abs(u) - 0.5) +
                                                  (w + 0.2) * (w + 0.2)));
      model.mean_albedo.row(i) << skin.x() - rim + cheek, skin.y() - rim, skin.z() - rim;
    }
  }
  model.mean_albedo = model.mean_albedo.cwiseMax(0.0).cwiseMin(1.0);

  model.faces.resize(2 * (n - 1) * (n - 1), 3);
  int f = 0;
  for (int r = 0; r + 1 < n; ++r) {
    for (int c = 0; c + 1 < n; ++c) {
      const int tl = r * n + c;
      const int tr = tl + 1;
      const int bl = tl + n;
      const int br = bl + 1;
      // Rows grow downward (-y), columns grow along +x: (bl, br, tr) is CCW from +z.
      model.faces.row(f++) << bl, br, tr;
      model.faces.row(f++) << bl, tr, tl;
    }
  }

  Rng rng(seed);
  model.basis_id = orthonormal_basis(uv, options.num_id, rng);
  model.basis_exp = orthonormal_basis(uv, options.num_exp, rng);
  model.basis_tex = orthonormal_basis(uv, options.num_tex, rng);
  return model;
}

}  // namespace relit
