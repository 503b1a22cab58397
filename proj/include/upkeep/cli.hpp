#pragma once

// Command-line driver: configuration, dispatch and CSV emission. The binary in
// tools/ only parses flags into a RunConfig and calls run().

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "upkeep/sim.hpp"

namespace upkeep {

enum class Mode { fb, part, ic, simulate, sweep, oracle_check };

Mode parse_mode(const std::string& s);
const char* to_string(Mode m);

struct RhoGrid {
  double start = 1.0;
  double stop = 1.0;
  int count = 2;
  bool log = false;

  /// "start:stop:count[:log]".
  static RhoGrid parse(const std::string& s);
  std::vector<double> points() const;
};

struct RunConfig {
  Mode mode = Mode::part;
  std::string input;
  std::optional<double> rho;
  double tol = 1e-9;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon;  ///< simulate: defaults to 1e5 / rho
  std::optional<RhoGrid> rho_grid;
  std::string output;  ///< empty: standard output

  // Mode details beyond the core flags.
  Mode solver = Mode::part;  ///< mechanism used by simulate and oracle-check
  SimKind sim_kind = SimKind::poisson;
  bool with_ic = false;  ///< sweep: append screening columns
  std::string trace;     ///< simulate: event dump path
  std::optional<double> oracle_tol;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 2,
  kExitValidation = 3,
  kExitDegenerate = 4,
  kExitOracleMismatch = 5,
};

/// Executes one run, writing results to `out` (or cfg.output) and diagnostics to `err`.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace upkeep
