#include "upkeep/cli.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "upkeep/first_best.hpp"
#include "upkeep/io.hpp"
#include "upkeep/kernels.hpp"
#include "upkeep/oracle.hpp"
#include "upkeep/participation.hpp"
#include "upkeep/screening.hpp"

namespace upkeep {

Mode parse_mode(const std::string& s) {
  if (s == "fb") return Mode::fb;
  if (s == "part") return Mode::part;
  if (s == "ic") return Mode::ic;
  if (s == "simulate") return Mode::simulate;
  if (s == "sweep") return Mode::sweep;
  if (s == "oracle-check") return Mode::oracle_check;
  throw ParseError(0, "unknown mode '" + s + "'");
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::fb: return "fb";
    case Mode::part: return "part";
    case Mode::ic: return "ic";
    case Mode::simulate: return "simulate";
    case Mode::sweep: return "sweep";
    case Mode::oracle_check: return "oracle-check";
  }
  return "?";
}

RhoGrid RhoGrid::parse(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3 && parts.size() != 4) throw ParseError(0, "rho grid must be start:stop:count[:log]");
  RhoGrid g;
  g.start = parse_number(parts[0], 0);
  g.stop = parse_number(parts[1], 0);
  char* end = nullptr;
  const long count = std::strtol(parts[2].c_str(), &end, 10);
  if (end != parts[2].c_str() + parts[2].size()) throw ParseError(0, "rho grid count must be an integer");
  g.count = static_cast<int>(count);
  if (parts.size() == 4) {
    if (parts[3] != "log" && parts[3] != "lin") throw ParseError(0, "rho grid spacing must be 'log' or 'lin'");
    g.log = parts[3] == "log";
  }
  return g;
}

std::vector<double> RhoGrid::points() const {
  if (count < 2) throw ValidationError("rho grid needs at least 2 points");
  if (!(start > 0.0) || !(stop > 0.0) || !std::isfinite(start) || !std::isfinite(stop))
    throw ValidationError("rho grid endpoints must be positive and finite");
  std::vector<double> pts(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double f = static_cast<double>(k) / (count - 1);
    pts[static_cast<std::size_t>(k)] =
        log ? std::exp(std::log(start) + f * (std::log(stop) - std::log(start))) : start + f * (stop - start);
  }
  pts.back() = stop;
  return pts;
}

namespace {

struct Solved {
  Mechanism mechanism;
  std::vector<std::string> classes;
  double y = 0.0;
  double W = 0.0;
};

Solved solve_mode(Mode mode, const TypeDistribution& d, double rho, double tol) {
  Solved s;
  switch (mode) {
    case Mode::fb: {
      auto fb = solve_first_best(d, rho, tol);
      s.mechanism = std::move(fb.mechanism);
      for (double p : s.mechanism.P) s.classes.push_back(p > tol ? "FULL" : "NONE");
      s.y = fb.y_fb;
      s.W = fb.W_fb;
      break;
    }
    case Mode::part: {
      auto sol = solve_participation(d, rho, tol);
      s.mechanism = std::move(sol.mechanism);
      for (auto c : sol.classes) s.classes.push_back(to_string(c));
      s.y = sol.y_star;
      s.W = sol.W_star;
      break;
    }
    case Mode::ic: {
      auto sol = solve_screening(d, rho, tol);
      s.mechanism = std::move(sol.mechanism);
      for (int a : sol.assignment) s.classes.push_back(a == kOut ? "OUT" : (a == 0 ? "TIER1" : "TIER2"));
      s.y = sol.y_star;
      s.W = sol.W_star;
      break;
    }
    default:
      throw ValidationError(std::string("--solver must be fb, part or ic, not ") + to_string(mode));
  }
  return s;
}

double require_rho(const RunConfig& cfg) {
  if (!cfg.rho) throw ValidationError(std::string("mode ") + to_string(cfg.mode) + " requires --rho");
  if (!(*cfg.rho > 0.0) || !std::isfinite(*cfg.rho)) throw ValidationError("--rho must be positive and finite");
  return *cfg.rho;
}

void csv_row(std::string& out, std::initializer_list<std::string> fields) {
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  out += '\n';
}

std::string run_simulate(const RunConfig& cfg, const TypeDistribution& d) {
  const double rho = require_rho(cfg);
  if (!cfg.seed) throw ValidationError("mode simulate requires --seed");
  const auto solved = solve_mode(cfg.solver, d, rho, cfg.tol);
  const auto pol = build_policy(solved.mechanism);
  PhysicalParams phys;
  phys.rho = rho;
  SimOptions opt;
  opt.horizon = cfg.horizon.value_or(1e5 / rho);
  opt.seed = cfg.seed;
  std::ofstream trace;
  if (!cfg.trace.empty()) {
    trace.open(cfg.trace);
    if (!trace) throw std::runtime_error("cannot open trace file '" + cfg.trace + "'");
    opt.trace = &trace;
  }
  const auto st = simulate(cfg.sim_kind, pol, d, phys, opt);
  const auto check = check_reduced_form(st, solved.mechanism, 4.0);

  std::string out = "metric,estimate,ci_radius\n";
  auto est = [&](const std::string& name, const Estimate& e) {
    csv_row(out, {name, format_number(e.value), format_number(e.ci)});
  };
  auto flag = [&](const std::string& name, bool v) { csv_row(out, {name, v ? "1" : "0", "0"}); };
  est("Q", st.Q_hat);
  for (std::size_t i = 0; i < d.size(); ++i) est("R:" + d[i].id, st.R_hat[i]);
  for (std::size_t i = 0; i < d.size(); ++i) est("P:" + d[i].id, st.P_hat[i]);
  est("break_rate", st.break_rate);
  est("lifespan_mean", st.lifespan_mean);
  csv_row(out, {"n_breaks", std::to_string(st.n_breaks), "0"});
  flag("usage_only_working", st.usage_only_working);
  flag("contribution_only_broken", st.contribution_only_broken);
  flag("lifespan_mean_ok", st.lifespan_mean_ok);
  flag("reduced_form_pass", check.pass);
  return out;
}

std::string run_sweep(const RunConfig& cfg, const TypeDistribution& d) {
  if (!cfg.rho_grid) throw ValidationError("mode sweep requires --rho-grid");
  const auto rhos = cfg.rho_grid->points();
  struct Row {
    double y_fb, Q_fb, W_fb, y_star, Q_star, W_star, y_ic = 0, Q_ic = 0, W_ic = 0;
  };
  const auto rows = parallel_map<Row>(
      rhos.size(),
      [&](std::size_t k) {
        const auto fb = solve_first_best(d, rhos[k], cfg.tol);
        const auto part = solve_participation(d, rhos[k], cfg.tol);
        Row r{fb.y_fb, fb.Q_fb, fb.W_fb, part.y_star, part.Q_star, part.W_star};
        if (cfg.with_ic) {
          const auto ic = solve_screening(d, rhos[k], cfg.tol);
          r.y_ic = ic.y_star;
          r.Q_ic = ic.Q_star;
          r.W_ic = ic.W_star;
        }
        return r;
      },
      Exec::parallel);
  std::string out = "rho,y_fb,Q_fb,W_fb,y_star,Q_star,W_star";
  out += cfg.with_ic ? ",y_ic,Q_ic,W_ic\n" : "\n";
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    const auto& r = rows[k];
    out += format_number(rhos[k]) + "," + format_number(r.y_fb) + "," + format_number(r.Q_fb) + "," +
           format_number(r.W_fb) + "," + format_number(r.y_star) + "," + format_number(r.Q_star) + "," +
           format_number(r.W_star);
    if (cfg.with_ic)
      out += "," + format_number(r.y_ic) + "," + format_number(r.Q_ic) + "," + format_number(r.W_ic);
    out += '\n';
  }
  return out;
}

std::string run_oracle_check(const RunConfig& cfg, const TypeDistribution& d, bool& mismatch) {
  const double rho = require_rho(cfg);
  const auto solved = solve_mode(cfg.solver, d, rho, cfg.tol);
  double W_oracle = 0.0;
  double tol = cfg.oracle_tol.value_or(1e-3);
  switch (cfg.solver) {
    case Mode::fb:
      W_oracle = primal_grid_welfare(d, rho, PrimalMode::first_best).W;
      break;
    case Mode::part:
      W_oracle = primal_grid_welfare(d, rho, PrimalMode::participation).W;
      break;
    default:
      W_oracle = lp_screening_welfare(d, rho).W;
      tol = cfg.oracle_tol.value_or(2e-3);
      break;
  }
  const double delta = solved.W - W_oracle;
  mismatch = !(std::abs(delta) <= tol);
  return "W_solver,W_oracle,delta\n" + format_number(solved.W) + "," + format_number(W_oracle) + "," +
         format_number(delta) + "\n";
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (!(cfg.tol > 0.0)) throw ValidationError("--tol must be positive");
    if (cfg.input.empty()) throw ValidationError("--input is required");
    const auto d = parse_types(read_file(cfg.input));

    std::string text;
    int status = kExitOk;
    switch (cfg.mode) {
      case Mode::fb:
      case Mode::part:
      case Mode::ic: {
        const double rho = require_rho(cfg);
        const auto s = solve_mode(cfg.mode, d, rho, cfg.tol);
        text = format_mechanism_table(d, s.mechanism, s.classes, s.y, rho);
        break;
      }
      case Mode::simulate:
        text = run_simulate(cfg, d);
        break;
      case Mode::sweep:
        text = run_sweep(cfg, d);
        break;
      case Mode::oracle_check: {
        bool mismatch = false;
        text = run_oracle_check(cfg, d, mismatch);
        if (mismatch) status = kExitOracleMismatch;
        break;
      }
    }

    if (cfg.output.empty()) {
      out << text;
    } else {
      std::ofstream f(cfg.output, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open output '" + cfg.output + "'");
      f << text;
    }
    return status;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DegenerateError& e) {
    err << "degenerate input: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const std::invalid_argument& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }
}

}  // namespace upkeep
