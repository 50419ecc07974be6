// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/logging.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace relit {

void init_logging() {
  auto logger = spdlog::get("relit");
  if (!logger) {
    logger = spdlog::stderr_color_mt("relit");
  }
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("RELIT_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace relit
