// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/cli.hpp"

namespace relit {

Json RunManifest::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"subcommand", subcommand},
          {"args", args},
          {"config", config},
          {"seed", seed},
          {"inputs", inputs},
          {"outputs", outputs},
          {"toolkit_version", toolkit_version},
          {"wall_time_seconds", wall_time_seconds}};
}

RunManifest RunManifest::from_json(const Json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion) {
      throw InputError("run manifest: unsupported schema_version");
    }
    RunManifest m;
    m.subcommand = doc.at("subcommand").get<std::string>();
    m.args = doc.at("args").get<std::vector<std::string>>();
    m.config = doc.value("config", Json::object());
    m.seed = doc.value("seed", std::uint64_t{0});
    m.inputs = doc.value("inputs", std::vector<std::string>{});
    m.outputs = doc.value("outputs", std::vector<std::string>{});
    m.toolkit_version = doc.value("toolkit_version", std::string());
    m.wall_time_seconds = doc.value("wall_time_seconds", 0.0);
    return m;
  } catch (const Json::exception& e) {
    throw InputError(std::string("run manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  save_json(dir / kManifestName, manifest.to_json());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  return RunManifest::from_json(load_json(path));
}

}  // namespace relit
