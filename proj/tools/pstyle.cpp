// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "pstyle/cli.hpp"

int main(int argc, char** argv) {
  return pstyle::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
