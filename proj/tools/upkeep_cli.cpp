#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "upkeep/cli.hpp"
#include "upkeep/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Solver and simulator for collective-upkeep mechanisms"};
  upkeep::RunConfig cfg;
  std::string mode, solver = "part", sim_kind = "poisson", grid;
  double rho = 0.0, horizon = 0.0, oracle_tol = 0.0;
  std::uint64_t seed = 0;

  app.add_option("--mode", mode, "fb | part | ic | simulate | sweep | oracle-check")->required();
  app.add_option("--input", cfg.input, "type file with header id,u,c,mass")->required();
  auto* rho_opt = app.add_option("--rho", rho, "breakage rate");
  app.add_option("--tol", cfg.tol, "solver and feasibility tolerance");
  auto* seed_opt = app.add_option("--seed", seed, "simulation seed");
  auto* horizon_opt = app.add_option("--horizon", horizon, "simulated time after warm-up (default 1e5/rho)");
  auto* grid_opt = app.add_option("--rho-grid", grid, "start:stop:count[:log]");
  app.add_option("--output", cfg.output, "output file (default: stdout)");
  app.add_option("--solver", solver, "mechanism for simulate / oracle-check: fb | part | ic");
  app.add_option("--sim-kind", sim_kind, "poisson | fluid");
  app.add_flag("--with-ic", cfg.with_ic, "sweep: also solve the screening problem");
  app.add_option("--trace", cfg.trace, "simulate: write the event trace here");
  auto* otol_opt = app.add_option("--oracle-tol", oracle_tol, "oracle-check: allowed |delta|");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return upkeep::kExitParse;
  }

  try {
    cfg.mode = upkeep::parse_mode(mode);
    cfg.solver = upkeep::parse_mode(solver);
    if (sim_kind == "poisson")
      cfg.sim_kind = upkeep::SimKind::poisson;
    else if (sim_kind == "fluid")
      cfg.sim_kind = upkeep::SimKind::fluid;
    else
      throw upkeep::ParseError(0, "unknown --sim-kind '" + sim_kind + "'");
    if (*grid_opt) cfg.rho_grid = upkeep::RhoGrid::parse(grid);
  } catch (const upkeep::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return upkeep::kExitParse;
  }
  if (*rho_opt) cfg.rho = rho;
  if (*seed_opt) cfg.seed = seed;
  if (*horizon_opt) cfg.horizon = horizon;
  if (*otol_opt) cfg.oracle_tol = oracle_tol;

  return upkeep::run(cfg, std::cout, std::cerr);
}
