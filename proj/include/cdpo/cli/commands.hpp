#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdpo/orthocheck/suite.hpp"

namespace cdpo::cli {

/// Exit codes: 0 when all requested work succeeded and every check passed,
/// 1 for failed work or checks, 2 for usage and configuration errors.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, with args[0] being the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Theory-suite settings from YAML keys n_dgps, nx, ny, nv, seed, step, epsilons.
ortho::SuiteConfig suite_config_from_yaml(const std::string& text);

}  // namespace cdpo::cli
