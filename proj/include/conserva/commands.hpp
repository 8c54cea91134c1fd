#ifndef CONSERVA_COMMANDS_HPP
#define CONSERVA_COMMANDS_HPP

#include <optional>
#include <string>

#include "conserva/config.hpp"
#include "conserva/parallel.hpp"

namespace conserva {

struct CommandOptions {
    bool check = false;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    ExecMode mode = ExecMode::parallel;
};

/// Subcommand bodies. Each writes CSV/JSON outputs under the output
/// directory, prints gate lines in --check mode, and returns true when every
/// gate passed (always true outside --check mode unless an error is thrown).
bool cmd_simulate(const ExperimentConfig& config, const CommandOptions& options);
bool cmd_meanfield(const ExperimentConfig& config, const CommandOptions& options);
bool cmd_hydro(const ExperimentConfig& config, const CommandOptions& options);
bool cmd_fluct(const ExperimentConfig& config, const CommandOptions& options);
bool cmd_indep(const ExperimentConfig& config, const CommandOptions& options);

/// Full CLI entry point (parses argv); returns the process exit code:
/// 0 success, 2 config/usage validation, 3 numerical failure, 4 gate failure
/// in --check mode.
int run_cli(int argc, char** argv);

} // namespace conserva

#endif
