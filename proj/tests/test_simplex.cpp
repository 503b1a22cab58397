#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>

#include "test_support.hpp"
#include "upkeep/simplex.hpp"

using namespace upkeep;

TEST_CASE("textbook maximization") {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
  LinearProgram lp;
  lp.objective = {3, 5};
  lp.add_le({1, 0}, 4);
  lp.add_le({0, 2}, 12);
  lp.add_le({3, 2}, 18);
  const auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(36.0));
  CHECK(r.x[0] == doctest::Approx(2.0));
  CHECK(r.x[1] == doctest::Approx(6.0));
}

TEST_CASE("infeasible and unbounded programs") {
  LinearProgram bad;
  bad.objective = {1, 1};
  bad.add_le({1, 1}, 1);
  bad.add_le({-1, -1}, -2);
  CHECK(solve_lp(bad).status == LpStatus::infeasible);

  LinearProgram open;
  open.objective = {1, 0};
  open.add_le({-1, 1}, 1);
  CHECK(solve_lp(open).status == LpStatus::unbounded);
}

TEST_CASE("equality rows and negative right-hand sides") {
  // max x - y, x + y = 2, x >= 0.5 (as -x <= -0.5), x <= 1.5
  LinearProgram lp;
  lp.objective = {1, -1};
  lp.add_eq({1, 1}, 2);
  lp.add_le({-1, 0}, -0.5);
  lp.add_le({1, 0}, 1.5);
  const auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.x[0] == doctest::Approx(1.5));

  // redundant equality: the artificial stays basic at zero
  LinearProgram dup;
  dup.objective = {1, 2};
  dup.add_eq({1, 1}, 1);
  dup.add_eq({2, 2}, 2);
  const auto d = solve_lp(dup);
  REQUIRE(d.status == LpStatus::optimal);
  CHECK(d.value == doctest::Approx(2.0));
}

TEST_CASE("degenerate cycling example terminates") {
  // Beale's example; Dantzig's rule cycles, Bland's does not. Optimum 5/4 at (1, 0, 1, 0).
  LinearProgram lp;
  lp.objective = {0.75, -20, 0.5, -6};
  lp.add_le({0.25, -8, -1, 9}, 0);
  lp.add_le({0.5, -12, -0.5, 3}, 0);
  lp.add_le({0, 0, 1, 0}, 1);
  const auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(1.25));
}

TEST_CASE("random two-variable programs match vertex enumeration") {
  testing_support::Gen g(7);
  for (int rep = 0; rep < 300; ++rep) {
    LinearProgram lp;
    lp.objective = {g.uniform(-2, 2), g.uniform(-2, 2)};
    const int rows = g.integer(1, 5);
    for (int k = 0; k < rows; ++k) lp.add_le({g.uniform(-1, 2), g.uniform(-1, 2)}, g.uniform(-0.5, 3));
    lp.add_le({1, 1}, 10);  // keeps the region bounded

    // All pairwise intersections of constraint lines, axes included.
    std::vector<std::array<double, 3>> lines;  // a x + b y = c
    for (std::size_t k = 0; k < lp.le_rows.size(); ++k)
      lines.push_back({lp.le_rows[k][0], lp.le_rows[k][1], lp.le_rhs[k]});
    lines.push_back({1, 0, 0});
    lines.push_back({0, 1, 0});
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < lines.size(); ++a)
      for (std::size_t b = a + 1; b < lines.size(); ++b) {
        const double det = lines[a][0] * lines[b][1] - lines[a][1] * lines[b][0];
        if (std::abs(det) < 1e-12) continue;
        const double x = (lines[a][2] * lines[b][1] - lines[a][1] * lines[b][2]) / det;
        const double y = (lines[a][0] * lines[b][2] - lines[a][2] * lines[b][0]) / det;
        if (x < -1e-9 || y < -1e-9) continue;
        bool ok = true;
        for (std::size_t k = 0; k < lp.le_rows.size() && ok; ++k)
          ok = lp.le_rows[k][0] * x + lp.le_rows[k][1] * y <= lp.le_rhs[k] + 1e-9;
        if (ok) best = std::max(best, lp.objective[0] * x + lp.objective[1] * y);
      }

    const auto r = solve_lp(lp);
    if (std::isinf(best)) {
      CHECK(r.status == LpStatus::infeasible);
    } else {
      REQUIRE(r.status == LpStatus::optimal);
      CHECK(r.value == doctest::Approx(best).epsilon(1e-7).scale(1.0));
    }
  }
}
