#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "test_support.hpp"
#include "upkeep/cli.hpp"
#include "upkeep/io.hpp"
#include "upkeep/screening.hpp"

using namespace upkeep;

namespace {

const std::string kData = UPKEEP_EXAMPLES_DIR;

struct Outcome {
  int status = -1;
  std::string out;
  std::string err;
};

Outcome run_config(const RunConfig& cfg) {
  std::ostringstream out, err;
  Outcome o;
  o.status = run(cfg, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

RunConfig config(Mode mode, const std::string& file, double rho) {
  RunConfig c;
  c.mode = mode;
  c.input = kData + "/" + file;
  c.rho = rho;
  return c;
}

/// Value of "key=" in the summary line.
double summary_value(const std::string& text, const std::string& key) {
  const auto at = text.find(key + "=");
  REQUIRE(at != std::string::npos);
  return parse_number(text.substr(at + key.size() + 1, text.find(',', at) - at - key.size() - 1), 0);
}

std::string summary_field(const std::string& text, const std::string& key) {
  const auto at = text.find(key + "=");
  if (at == std::string::npos) return {};
  const auto stop = text.find_first_of(",\n", at);
  return text.substr(at + key.size() + 1, stop - at - key.size() - 1);
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_csv(line));
  return rows;
}

Outcome run_binary(const std::string& args) {
  const std::string cmd = std::string(UPKEEP_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, got);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

}  // namespace

TEST_CASE("type files") {
  const auto d = parse_types("id,u,c,mass\nL,3,3,1\nM,4,2,1\nH,10,1.25,1");
  REQUIRE(d.size() == 3);
  CHECK(d[0].id == "L");
  CHECK(d[2].u == 10.0);
  CHECK(d[2].c == 1.25);
  CHECK(d.total_mass() == 3.0);

  const auto commented = parse_types("# comment\n\nid,u,c,mass\n# another\nA,1.5,2,0.5\n");
  REQUIRE(commented.size() == 1);
  CHECK(commented[0].mass == 0.5);

  CHECK_THROWS_AS(parse_types("id,u,c,mass\n"), ValidationError);
  CHECK_THROWS_AS(parse_types("id,u,c,mass\nA,1,0,1"), ValidationError);
  CHECK_THROWS_AS(parse_types("id,u,c,mass\nA,-1,1,1"), ValidationError);
  CHECK_THROWS_AS(parse_types("id,u,c,mass\nA,1,1,1\nA,2,1,1"), ValidationError);
  CHECK_THROWS_AS(parse_types("name,u,c,mass\nA,1,1,1"), ParseError);
  CHECK_THROWS_AS(parse_types("id,u,c,mass\nA,1,1"), ParseError);
  CHECK_THROWS_AS(parse_types("id,u,c,mass\nA,1,x,1"), ParseError);
  try {
    parse_types("id,u,c,mass\nA,1,1,1\nB,1,oops,1");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  try {
    parse_types("id,u,c,mass\nA,1,0,1");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find('c') != std::string::npos);
  }
}

TEST_CASE("number rendering") {
  CHECK(format_number(2.0 / 7.0) == "0.285714285714");
  CHECK(format_number(45.0 / 14.0) == "3.21428571429");
  CHECK(format_number(kInf) == "inf");
  CHECK(format_number(-kInf) == "-inf");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1e-20) == "1e-20");
  CHECK(std::isinf(parse_number("inf", 1)));
  CHECK(parse_number("0.25", 1) == 0.25);
  CHECK_THROWS_AS(parse_number("", 4), ParseError);
  CHECK_THROWS_AS(parse_number("1.0x", 4), ParseError);
}

TEST_CASE("rho grids") {
  const auto lin = RhoGrid::parse("1:4:4");
  CHECK(lin.points() == std::vector<double>{1, 2, 3, 4});
  const auto lg = RhoGrid::parse("1:8:4:log");
  const auto p = lg.points();
  REQUIRE(p.size() == 4);
  CHECK(p[1] == doctest::Approx(2.0));
  CHECK(p[3] == 8.0);
  CHECK_THROWS_AS(RhoGrid::parse("1:8:1").points(), ValidationError);
  CHECK_THROWS_AS(RhoGrid::parse("1:8"), ParseError);
  CHECK_THROWS_AS(RhoGrid::parse("0:8:4:log").points(), ValidationError);
}

TEST_CASE("mechanism tables round trip through check_feasible") {
  for (Mode mode : {Mode::fb, Mode::part, Mode::ic}) {
    for (const auto& [file, rho] : {std::pair{"example1.csv", 5.5}, std::pair{"example2.csv", 1.0}}) {
      const auto o = run_config(config(mode, file, rho));
      REQUIRE(o.status == kExitOk);
      CHECK(o.out.rfind(kMechanismHeader, 0) == 0);
      const auto table = parse_mechanism_table(o.out);
      unsigned fam = Family::balance | Family::simplex;
      if (mode != Mode::fb) fam = fam | Family::participation;
      if (mode == Mode::ic) fam = kAllFamilies;
      // Emitted values carry 12 significant digits.
      const auto rep = check_feasible(table.mechanism, table.types, rho, fam, 1e-9);
      CAPTURE(to_string(mode));
      CAPTURE(file);
      CHECK(rep.ok());
      CHECK(std::abs(table.balance_residual) <= 1e-9);
    }
  }
}

TEST_CASE("modes on the worked examples") {
  const auto part = run_config(config(Mode::part, "example1.csv", 5.5));
  REQUIRE(part.status == kExitOk);
  CHECK(summary_field(part.out, "Q") == "0.285714285714");
  CHECK(summary_field(part.out, "y") == "3.21428571429");
  const auto rows = csv_rows(part.out);
  CHECK(rows[1][8] == "BOUND");
  CHECK(rows[2][8] == "BOUND");
  CHECK(rows[3][8] == "FULL");
  CHECK(rows[1][0] == "L");  // input order

  const auto fb = run_config(config(Mode::fb, "example1.csv", 5.5));
  CHECK(summary_field(fb.out, "y") == "2.7");
  CHECK(summary_value(fb.out, "W") == doctest::Approx(2.15));

  const auto ic = run_config(config(Mode::ic, "example2.csv", 1.0));
  REQUIRE(ic.status == kExitOk);
  CHECK(summary_value(ic.out, "Q") == doctest::Approx(0.3).epsilon(1e-6));
  const auto ir = csv_rows(ic.out);
  CHECK(ir[1][8] == "TIER1");
  CHECK(ir[2][8] == "TIER2");
  CHECK(ir[3][8] == "OUT");

  // No slack-feasible participation mechanism: y renders as inf.
  const auto none = run_config(config(Mode::part, "example2.csv", 100.0));
  REQUIRE(none.status == kExitOk);
  CHECK(summary_field(none.out, "y") == "inf");
}

TEST_CASE("sweeps are monotone") {
  auto cfg = config(Mode::sweep, "example1.csv", 1.0);
  cfg.rho.reset();
  cfg.rho_grid = RhoGrid::parse("1:8:4:log");
  cfg.with_ic = true;
  const auto o = run_config(cfg);
  REQUIRE(o.status == kExitOk);
  const auto rows = csv_rows(o.out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"rho", "y_fb", "Q_fb", "W_fb", "y_star", "Q_star",
                                            "W_star", "y_ic", "Q_ic", "W_ic"});
  for (std::size_t r = 2; r < rows.size(); ++r) {
    CHECK(parse_number(rows[r][2], r) <= parse_number(rows[r - 1][2], r));
    CHECK(parse_number(rows[r][5], r) <= parse_number(rows[r - 1][5], r));
  }
}

TEST_CASE("simulate and oracle-check modes") {
  auto sim = config(Mode::simulate, "example2.csv", 1.0);
  sim.solver = Mode::ic;
  sim.seed = 1;
  sim.horizon = 2e4;
  const auto a = run_config(sim);
  REQUIRE(a.status == kExitOk);
  CHECK(a.out.rfind("metric,estimate,ci_radius\n", 0) == 0);
  CHECK(a.out.find("reduced_form_pass,1,") != std::string::npos);
  CHECK(run_config(sim).out == a.out);

  sim.seed.reset();
  CHECK(run_config(sim).status == kExitValidation);

  auto oc = config(Mode::oracle_check, "example1.csv", 5.5);
  const auto o = run_config(oc);
  CHECK(o.status == kExitOk);
  CHECK(o.out.rfind("W_solver,W_oracle,delta\n", 0) == 0);
  oc.oracle_tol = 1e-30;
  oc.solver = Mode::fb;
  CHECK(run_config(oc).status == kExitOracleMismatch);
}

TEST_CASE("exit statuses") {
  CHECK(run_config(config(Mode::fb, "missing.csv", 1.0)).status != kExitOk);
  auto no_rho = config(Mode::fb, "example1.csv", 1.0);
  no_rho.rho.reset();
  CHECK(run_config(no_rho).status == kExitValidation);
  CHECK(run_config(config(Mode::fb, "example1.csv", -1.0)).status == kExitValidation);
  CHECK(run_config(config(Mode::fb, "zero_mass.csv", 1.0)).status == kExitValidation);
  CHECK(run_config(config(Mode::fb, "malformed.csv", 1.0)).status == kExitParse);
}

TEST_CASE("the binary is deterministic and reports statuses") {
  const std::string ex1 = " --input " + kData + "/example1.csv";
  const auto a = run_binary("--mode part --rho 5.5" + ex1);
  const auto b = run_binary("--mode part --rho 5.5" + ex1);
  CHECK(a.status == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("Q=0.285714285714") != std::string::npos);

  const auto s1 = run_binary("--mode simulate --rho 5.5 --seed 4 --horizon 2000 --sim-kind fluid" + ex1);
  const auto s2 = run_binary("--mode simulate --rho 5.5 --seed 4 --horizon 2000 --sim-kind fluid" + ex1);
  CHECK(s1.status == 0);
  CHECK(s1.out == s2.out);

  CHECK(run_binary("--mode nonsense --rho 1" + ex1).status == kExitParse);
  CHECK(run_binary("--mode fb --rho abc" + ex1).status == kExitParse);
  CHECK(run_binary("--mode fb --rho 1 --input " + kData + "/zero_mass.csv").status == kExitValidation);
}
