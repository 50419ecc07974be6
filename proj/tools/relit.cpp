// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/cli.hpp"

int main(int argc, char** argv) {
  return relit::run_cli({argv + 1, argv + argc});
}
