//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_COMMANDS_HPP
#define PMOL_COMMANDS_HPP

#include <string>

#include <json.hpp>

namespace pmol {

// Commands: train-diffusion, train-align, sample, optimize, evaluate.
// Configs are strict JSON (unknown keys rejected); every run writes its
// fully defaulted config as resolved_config.json next to its outputs.
// Returns the primary output path.  ConfigError and RuntimeError propagate.
std::string run_command(const std::string& command,
                        const std::string& config_json);

std::string cmd_train_diffusion(const nlohmann::json& config);
std::string cmd_train_align(const nlohmann::json& config);
std::string cmd_sample(const nlohmann::json& config);
std::string cmd_optimize(const nlohmann::json& config);
std::string cmd_evaluate(const nlohmann::json& config);

// Relative checkpoint paths that do not exist locally are retried under
// $PROMPTMOL_CHECKPOINT_ROOT when it is set.
std::string resolve_checkpoint_path(const std::string& path);

}  // namespace pmol

#endif  // PMOL_COMMANDS_HPP
