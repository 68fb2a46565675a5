// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pstyle/stylize.hpp"
#include "pstyle/view_set.hpp"

namespace pstyle {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitValidation = 3,
  kExitIo = 4,
  kExitNumeric = 5,
};

/// Runs one CLI invocation; args excludes the program name.
int run_cli(const std::vector<std::string>& args);

/// Builds a stylization config from the merged JSON document of a stylize
/// run (config file plus flag overrides). Weight presets for `kind` are
/// applied first; explicit "weights" entries override them.
StylizeConfig stylize_config_from_json(const nlohmann::json& doc, SceneKind kind);

}  // namespace pstyle
