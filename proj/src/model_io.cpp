// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace relit {

namespace {

constexpr const char* kShOrder = "Y00,Y1-1,Y10,Y11,Y2-2,Y2-1,Y20,Y21,Y22";

void check_schema(const Json& doc, const char* what) {
  if (!doc.is_object()) {
    throw InputError(std::string(what) + " document must be a JSON object");
  }
  if (doc.contains("schema_version") && doc.at("schema_version").get<int>() != kSchemaVersion) {
    throw InputError(std::string(what) + ": unsupported schema_version " +
                     doc.at("schema_version").dump());
  }
}

Json table_to_json(const VertexTable& t) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    rows.push_back({t(i, 0), t(i, 1), t(i, 2)});
  }
  return rows;
}

VertexTable table_from_json(const Json& rows, Eigen::Index expected, const char* name) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != expected) {
    throw InputError(std::string(name) + " must be an array of " + std::to_string(expected) +
                     " rows");
  }
  VertexTable t(expected, 3);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const Json& r = rows[static_cast<std::size_t>(i)];
    if (!r.is_array() || r.size() != 3) {
      throw InputError(std::string(name) + " row " + std::to_string(i) + " must hold 3 numbers");
    }
    for (int k = 0; k < 3; ++k) {
      t(i, k) = r[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return t;
}

Json basis_to_json(const Eigen::MatrixXd& basis) {
  Json cols = Json::array();
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    cols.push_back(std::vector<double>(basis.col(c).data(), basis.col(c).data() + basis.rows()));
  }
  return cols;
}

Eigen::MatrixXd basis_from_json(const Json& cols, Eigen::Index rows, Eigen::Index count,
                                const char* name) {
  if (!cols.is_array() || static_cast<Eigen::Index>(cols.size()) != count) {
    throw InputError(std::string(name) + " must list " + std::to_string(count) + " columns");
  }
  Eigen::MatrixXd basis(rows, count);
  for (Eigen::Index c = 0; c < count; ++c) {
    const auto values = cols[static_cast<std::size_t>(c)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != rows) {
      throw InputError(std::string(name) + " column " + std::to_string(c) + " has " +
                       std::to_string(values.size()) + " entries, expected " +
                       std::to_string(rows));
    }
    basis.col(c) = Eigen::Map<const Eigen::VectorXd>(values.data(), rows);
  }
  return basis;
}

Eigen::VectorXd vector_from_json(const Json& doc, const char* key) {
  if (!doc.contains(key)) {
    return {};
  }
  const auto values = doc.at(key).get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

template <typename Fn>
auto with_json_errors(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

Json to_json(const MorphableModel& model) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["num_vertices"] = model.num_vertices();
  doc["num_faces"] = model.num_faces();
  doc["num_id"] = model.num_id();
  doc["num_exp"] = model.num_exp();
  doc["num_tex"] = model.num_tex();
  doc["mean_shape"] = table_to_json(model.mean_shape);
  doc["mean_albedo"] = table_to_json(model.mean_albedo);
  doc["basis_id"] = basis_to_json(model.basis_id);
  doc["basis_exp"] = basis_to_json(model.basis_exp);
  doc["basis_tex"] = basis_to_json(model.basis_tex);
  Json faces = Json::array();
  for (Eigen::Index f = 0; f < model.faces.rows(); ++f) {
    faces.push_back({model.faces(f, 0), model.faces(f, 1), model.faces(f, 2)});
  }
  doc["faces"] = std::move(faces);
  return doc;
}

MorphableModel model_from_json(const Json& doc) {
  check_schema(doc, "morphable model");
  return with_json_errors("morphable model", [&] {
    MorphableModel m;
    const Eigen::Index v = doc.at("num_vertices").get<Eigen::Index>();
    const Eigen::Index f = doc.at("num_faces").get<Eigen::Index>();
    m.mean_shape = table_from_json(doc.at("mean_shape"), v, "mean_shape");
    m.mean_albedo = table_from_json(doc.at("mean_albedo"), v, "mean_albedo");
    m.basis_id = basis_from_json(doc.at("basis_id"), 3 * v, doc.at("num_id").get<Eigen::Index>(),
                                 "basis_id");
    m.basis_exp = basis_from_json(doc.at("basis_exp"), 3 * v,
                                  doc.at("num_exp").get<Eigen::Index>(), "basis_exp");
    m.basis_tex = basis_from_json(doc.at("basis_tex"), 3 * v,
                                  doc.at("num_tex").get<Eigen::Index>(), "basis_tex");
    const Json& faces = doc.at("faces");
    if (!faces.is_array() || static_cast<Eigen::Index>(faces.size()) != f) {
      throw InputError("faces must list num_faces = " + std::to_string(f) + " triangles");
    }
    m.faces.resize(f, 3);
    for (Eigen::Index i = 0; i < f; ++i) {
      const auto idx = faces[static_cast<std::size_t>(i)].get<std::vector<int>>();
      if (idx.size() != 3) {
        throw InputError("face " + std::to_string(i) + " must have 3 indices");
      }
      m.faces.row(i) << idx[0], idx[1], idx[2];
    }
    m.validate();
    return m;
  });
}

Json to_json(const FaceCoefficients& coeffs) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["alpha"] = std::vector<double>(coeffs.alpha.data(), coeffs.alpha.data() + coeffs.alpha.size());
  doc["beta"] = std::vector<double>(coeffs.beta.data(), coeffs.beta.data() + coeffs.beta.size());
  doc["zeta"] = std::vector<double>(coeffs.zeta.data(), coeffs.zeta.data() + coeffs.zeta.size());
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) {
    rot.push_back({coeffs.pose.rotation(r, 0), coeffs.pose.rotation(r, 1),
                   coeffs.pose.rotation(r, 2)});
  }
  doc["pose"] = {{"rotation", rot},
                 {"translation",
                  {coeffs.pose.translation.x(), coeffs.pose.translation.y(),
                   coeffs.pose.translation.z()}}};
  return doc;
}

FaceCoefficients coefficients_from_json(const Json& doc) {
  check_schema(doc, "face coefficients");
  return with_json_errors("face coefficients", [&] {
    FaceCoefficients c;
    c.alpha = vector_from_json(doc, "alpha");
    c.beta = vector_from_json(doc, "beta");
    c.zeta = vector_from_json(doc, "zeta");
    if (doc.contains("pose")) {
      const Json& pose = doc.at("pose");
      Vec3 t = Vec3::Zero();
      if (pose.contains("translation")) {
        const auto tv = pose.at("translation").get<std::vector<double>>();
        if (tv.size() != 3) {
          throw InputError("pose.translation must hold 3 numbers");
        }
        t = Vec3(tv[0], tv[1], tv[2]);
      }
      if (pose.contains("quaternion")) {
        const auto q = pose.at("quaternion").get<std::vector<double>>();
        if (q.size() != 4) {
          throw InputError("pose.quaternion must hold [w, x, y, z]");
        }
        c.pose = Pose::from_quaternion(q[0], q[1], q[2], q[3], t);
      } else if (pose.contains("rotation")) {
        const auto rows = pose.at("rotation").get<std::vector<std::vector<double>>>();
        if (rows.size() != 3) {
          throw InputError("pose.rotation must be a 3x3 matrix");
        }
        for (int r = 0; r < 3; ++r) {
          if (rows[r].size() != 3) {
            throw InputError("pose.rotation must be a 3x3 matrix");
          }
          for (int k = 0; k < 3; ++k) {
            c.pose.rotation(r, k) = rows[r][k];
          }
        }
        c.pose.translation = t;
      } else {
        c.pose.translation = t;
      }
    }
    c.pose.validate();
    return c;
  });
}

Json to_json(const ShCoeffs& sh) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["order"] = kShOrder;
  Json channels = Json::array();
  for (int c = 0; c < kShChannels; ++c) {
    std::vector<double> row(kShTerms);
    for (int k = 0; k < kShTerms; ++k) {
      row[k] = sh.coeffs(c, k);
    }
    channels.push_back(row);
  }
  doc["channels"] = std::move(channels);
  return doc;
}

ShCoeffs sh_from_json(const Json& doc) {
  check_schema(doc, "SH coefficients");
  return with_json_errors("SH coefficients", [&] {
    const auto rows = doc.at("channels").get<std::vector<std::vector<double>>>();
    if (rows.size() != kShChannels) {
      throw InputError("SH channels must hold 3 rows, got " + std::to_string(rows.size()));
    }
    ShCoeffs sh;
    for (int c = 0; c < kShChannels; ++c) {
      if (rows[c].size() != kShTerms) {
        throw InputError("SH channel " + std::to_string(c) + " must hold 9 coefficients");
      }
      for (int k = 0; k < kShTerms; ++k) {
        sh.coeffs(c, k) = rows[c][k];
      }
    }
    if (!sh.all_finite()) {
      throw InputError("SH coefficients must be finite");
    }
    return sh;
  });
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("file not found: " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const Json& doc) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    }
    out << doc.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

MorphableModel load_model(const std::filesystem::path& path) {
  return model_from_json(load_json(path));
}

FaceCoefficients load_coefficients(const std::filesystem::path& path) {
  return coefficients_from_json(load_json(path));
}

ShCoeffs load_sh(const std::filesystem::path& path) { return sh_from_json(load_json(path)); }

void write_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  char line[256];
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    std::snprintf(line, sizeof(line), "v %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  mesh.positions(i, 0), mesh.positions(i, 1), mesh.positions(i, 2),
                  mesh.albedo(i, 0), mesh.albedo(i, 1), mesh.albedo(i, 2));
    out << line;
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    out << "f " << mesh.faces(f, 0) + 1 << " " << mesh.faces(f, 1) + 1 << " "
        << mesh.faces(f, 2) + 1 << "\n";
  }
}

Mesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("mesh not found: " + path.string());
  }
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') {
      continue;
    }
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
      }
      positions.emplace_back(x, y, z);
      double r, g, b;
      if (ls >> r >> g >> b) {
        colors.emplace_back(r, g, b);
      } else {
        colors.emplace_back(1.0, 1.0, 1.0);
      }
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // Accept "i", "i/t", "i/t/n", "i//n".
        const int v = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(v > 0 ? v - 1 : static_cast<int>(positions.size()) + v);
      }
      if (idx.size() < 3) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": face needs 3 indices");
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        faces.push_back({idx[0], idx[k], idx[k + 1]});
      }
    }
  }
  Mesh mesh;
  mesh.positions.resize(static_cast<Eigen::Index>(positions.size()), 3);
  mesh.albedo.resize(static_cast<Eigen::Index>(positions.size()), 3);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    mesh.positions.row(static_cast<Eigen::Index>(i)) = positions[i].transpose();
    mesh.albedo.row(static_cast<Eigen::Index>(i)) =
        colors[i].cwiseMax(0.0).cwiseMin(1.0).transpose();
  }
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces[f][k] < 0 || faces[f][k] >= static_cast<int>(positions.size())) {
        throw InputError(path.string() + ": face " + std::to_string(f) +
                         " references a missing vertex");
      }
      mesh.faces(static_cast<Eigen::Index>(f), k) = faces[f][k];
    }
  }
  mesh.normals = compute_vertex_normals(mesh.positions, mesh.faces);
  return mesh;
}

}  // namespace relit
