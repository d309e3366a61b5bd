#pragma once

#include "asphere/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace asphere {

// Resolved configuration of one command-line run. Values start from the
// defaults below, are overlaid by a --config JSON file when given, and
// explicit flags override both.
struct RunConfig {
  std::string subcommand;  // solve|invariants|legendre|transform|verify|perturb

  // Potential selection (mutually exclusive; when neither is given the
  // subcommand solves the Dirichlet problem on the domain where applicable).
  std::string builtin;
  std::string potential_file;
  std::vector<double> coefficients;  // builtin parameters (see make_builtin)
  int dim = 2;                       // ambient dimension for builtins

  std::string domain_spec;  // textual domain (io.hpp); "" = subcommand default
  int grid = 65;            // nodes per axis for solves and grid dumps

  std::vector<double> heights = {2.0, 4.0, 8.0};  // gradient-estimate sweep
  std::string suite = "all";                      // verify suite selector
  std::string map_spec;                           // row-major homogeneous map
  std::string at_spec;                            // single evaluation point
  std::uint64_t seed = 12345;
  bool quick = false;  // reduced resolutions for the verify suites

  std::string out_path;     // CSV artifact
  std::string report_path;  // JSON artifact

  SolverConfig solver;

  // Set when --help was requested: run() prints it and exits 0.
  std::string help_text;
};

// Parse the argument vector (without the program name). Values from a
// --config JSON file (keys mirroring the long flags) are applied before the
// explicit flags. Throws std::invalid_argument on unknown flags, malformed
// files, or contradictory selections (builtin plus potential-file).
RunConfig parse_config(const std::vector<std::string>& args);

// Execute one run; the human-readable summary goes to `out`, artifacts to the
// configured paths. Returns 0 when every asserted criterion passed, 1
// otherwise. Output files are guarded by <path>.lock against concurrent runs.
int run(const RunConfig& config, std::ostream& out);

// Full front door: parse_config + run with exit-code mapping (0 success,
// 1 criterion failure or run-time module error, 2 usage error).
int cli_main(int argc, const char* const* argv);

}  // namespace asphere
