// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relit/model_io.hpp"

namespace relit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

inline constexpr const char* kManifestName = "run_manifest.json";

/// Record written next to every subcommand's outputs.
struct RunManifest {
  std::string subcommand;
  /// Arguments after the subcommand, with path values made absolute.
  std::vector<std::string> args;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string toolkit_version = kToolkitVersion;
  double wall_time_seconds = 0.0;

  [[nodiscard]] Json to_json() const;
  static RunManifest from_json(const Json& doc);
};

/// Atomic write of `<dir>/run_manifest.json`.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests. `args` excludes the program name.
/// Returns 0 on success, 2 on invalid input, 1 on internal failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace relit
