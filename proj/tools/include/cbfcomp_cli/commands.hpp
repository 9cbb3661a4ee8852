#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cbfcomp/scenario.hpp"

namespace cbfcomp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitFailure = 3;

struct RunOptions {
    std::string out_dir;  ///< empty: write nothing
    std::optional<std::uint64_t> seed;
    std::optional<double> grid_scale;
    std::optional<std::string> state;  ///< "q1,q2,...;v1,v2,..."
    std::string barriers_path;
};

struct CommandResult {
    int exit_code = kExitOk;
    nlohmann::json report;
};

/// Seed and grid-scale overrides.
ScenarioConfig apply_overrides(ScenarioConfig cfg, const RunOptions& opt);

State parse_state_arg(const std::string& text, int n1, int n2);

CommandResult cmd_check_sets(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out);
CommandResult cmd_build(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out);
CommandResult cmd_simulate(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out);
CommandResult cmd_feascheck(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out);

/// Full command line; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cbfcomp::cli
