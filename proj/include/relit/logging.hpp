// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

namespace relit {

/// Configures the default spdlog sink on stderr. Level comes from RELIT_LOG
/// (trace, debug, info, warn, error, off); warn when unset.
void init_logging();

}  // namespace relit
