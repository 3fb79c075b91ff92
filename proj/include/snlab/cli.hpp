#pragma once

#include <string>

#include "snlab/config.hpp"

namespace snlab {

// Exit-status contract: 0 success, 2 validation/domain failure, 3 numeric or
// resource failure.
int run_cli(int argc, char** argv);

// Individual commands, exposed for tests. Each throws the module errors; the
// status mapping lives in run_cli.
void cmd_run(const std::string& config_path);
void cmd_demo();
void cmd_validate(const std::string& config_path);

// Runs an already-parsed config (used by cmd_run and the determinism tests).
void run_experiment(const ExperimentConfig& cfg);

}  // namespace snlab
