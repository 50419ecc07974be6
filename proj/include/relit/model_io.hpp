// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "relit/morphable_model.hpp"
#include "relit/sh_lighting.hpp"

namespace relit {

using Json = nlohmann::json;

// Every document carries "schema_version" (currently 1) and explicit dimension fields.
//
// MorphableModel:
//   {"schema_version", "num_vertices", "num_faces", "num_id", "num_exp", "num_tex",
//    "mean_shape": [[x,y,z]...], "mean_albedo": [[r,g,b]...],
//    "basis_id" / "basis_exp" / "basis_tex": [[3V floats] per column], "faces": [[i,j,k]...]}
// FaceCoefficients:
//   {"schema_version", "alpha": [...], "beta": [...], "zeta": [...],
//    "pose": {"rotation": [[3]x3] | "quaternion": [w,x,y,z], "translation": [x,y,z]}}
// ShCoeffs:
//   {"schema_version", "order": "Y00,Y1-1,Y10,Y11,Y2-2,Y2-1,Y20,Y21,Y22",
//    "channels": [[9 floats] R, [9 floats] G, [9 floats] B]}

Json to_json(const MorphableModel& model);
Json to_json(const FaceCoefficients& coeffs);
Json to_json(const ShCoeffs& sh);

MorphableModel model_from_json(const Json& doc);
FaceCoefficients coefficients_from_json(const Json& doc);
ShCoeffs sh_from_json(const Json& doc);

/// Parses a file; missing or malformed files raise InputError naming the path.
Json load_json(const std::filesystem::path& path);
/// Writes pretty-printed JSON through a temporary file and rename.
void save_json(const std::filesystem::path& path, const Json& doc);

MorphableModel load_model(const std::filesystem::path& path);
FaceCoefficients load_coefficients(const std::filesystem::path& path);
ShCoeffs load_sh(const std::filesystem::path& path);

/// OBJ with per-vertex colour ("v x y z r g b") and 1-based triangular faces.
void write_obj(const std::filesystem::path& path, const Mesh& mesh);
/// Reads positions, optional vertex colours (default 1) and faces; polygons are fanned.
/// Normals are recomputed.
Mesh read_obj(const std::filesystem::path& path);

}  // namespace relit
