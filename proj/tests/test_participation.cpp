#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "test_support.hpp"
#include "upkeep/first_best.hpp"
#include "upkeep/participation.hpp"

using namespace upkeep;
using testing_support::example1;
using testing_support::example2;
using testing_support::Gen;

namespace {

/// Brute-force participation welfare: dense Q grid, greedy fill by cost.
double dense_grid_welfare(const TypeDistribution& d, double rho, int points) {
  std::vector<std::size_t> idx(d.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return d[a].c < d[b].c; });
  double best = 0.0;
  for (int k = 0; k <= points; ++k) {
    const double Q = static_cast<double>(k) / points;
    double need = rho * Q, w = Q * d.u_bar();
    for (auto i : idx) {
      const double take = std::min(need, d[i].mass * std::min(1 - Q, Q * d[i].nu()));
      need -= take;
      w -= take * d[i].c;
    }
    if (need <= 1e-12) best = std::max(best, w);
  }
  return best;
}

}  // namespace

TEST_CASE("reduced Lagrangian") {
  const auto d = example1();
  CHECK(reduced_lagrangian(2.0 / 7.0, 45.0 / 14.0, d, 5.5) == doctest::Approx(13.75 / 7.0).epsilon(1e-13));
  CHECK(reduced_lagrangian(0.0, 3.3, d, 5.5) == 0.0);
  CHECK(reduced_lagrangian(1.0, 3.3, d, 5.5) == doctest::Approx(17.0 - 5.5 * 3.3));
}

TEST_CASE("inner maximization over uptime") {
  const auto d = example1();
  // At y* the map is flat between the kinks 1/9 and 1/3; the saddle uptime
  // 2/7 is one of the maximizers and the smallest one is the kink 1/9.
  const auto at_star = inner_max_Q(45.0 / 14.0, d, 5.5);
  CHECK(at_star.Q == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(reduced_lagrangian(2.0 / 7.0, 45.0 / 14.0, d, 5.5) == doctest::Approx(at_star.value).epsilon(1e-13));
  // Large y with rho above sum mass * nu: every positive uptime loses.
  CHECK(inner_max_Q(1e6, d, 12.0).Q == 0.0);
  const TypeDistribution one({{"A", 1, 1, 1}});
  // At y = 4/3 the map is flat on [1/2, 1]: the smallest maximizer is 1/2 and
  // the balanced uptime 2/3 lies inside the maximizing set.
  const auto flat = inner_max_Q(4.0 / 3.0, one, 0.5);
  CHECK(flat.Q == doctest::Approx(0.5));
  CHECK(reduced_lagrangian(2.0 / 3.0, 4.0 / 3.0, one, 0.5) == doctest::Approx(flat.value));
  Gen gen(2);
  for (int rep = 0; rep < 200; ++rep) {
    const auto dd = gen.instance(1, 6);
    const double rho = gen.log_uniform(0.1, 10), y = gen.uniform(0, 15);
    const auto im = inner_max_Q(y, dd, rho);
    double scan = -kInf;
    for (int k = 0; k <= 4000; ++k) scan = std::max(scan, reduced_lagrangian(k / 4000.0, y, dd, rho));
    CHECK(im.value >= scan - 1e-12 * std::max(1.0, std::abs(scan)));
    CHECK(im.value == doctest::Approx(reduced_lagrangian(im.Q, y, dd, rho)));
  }
}

TEST_CASE("Slater gap") {
  CHECK(slater_gap(example1(), 5.5) > 0.0);
  const TypeDistribution one({{"A", 1, 1, 1}});
  CHECK(slater_gap(one, 3.0) == 0.0);
  Gen gen(4);
  for (int rep = 0; rep < 100; ++rep) {
    const auto d = gen.instance(1, 5);
    CHECK(slater_gap(d, d.nu_mass() * gen.uniform(1.0, 3.0)) <= 1e-12);
  }
}

TEST_CASE("worked example 1") {
  const auto s = solve_participation(example1(), 5.5);
  REQUIRE(s.y_finite());
  CHECK(s.y_star == doctest::Approx(45.0 / 14.0).epsilon(1e-12));
  CHECK(s.Q_star == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(s.mechanism.P[0] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(s.mechanism.P[1] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
  CHECK(s.mechanism.P[2] == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
  CHECK(s.W_star == doctest::Approx(13.75 / 7.0).epsilon(1e-12));
  CHECK(s.classes[0] == ContributionClass::bound);
  CHECK(s.classes[1] == ContributionClass::bound);
  CHECK(s.classes[2] == ContributionClass::full);
  CHECK(std::string(to_string(s.classes[2])) == "FULL");

  const auto rep = classify_interval(s, example1());
  CHECK(rep.contiguous);
  CHECK(rep.span_lo == 2.0);
  CHECK(rep.span_hi == 3.0);
  CHECK(rep.contains_y_fb);
  CHECK(rep.passes);
  CHECK(rep.y_fb == doctest::Approx(2.7));
}

TEST_CASE("singleton with slack participation matches the first best") {
  const TypeDistribution one({{"A", 1, 1, 1}});
  const auto s = solve_participation(one, 0.5);
  const auto fb = solve_first_best(one, 0.5);
  CHECK(s.Q_star == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(s.mechanism.P[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(agent_utility(one[0], s.Q_star, s.mechanism.P[0]) == doctest::Approx(1.0 / 3.0));
  CHECK(s.W_star == doctest::Approx(fb.W_fb).epsilon(1e-12));
  const auto rep = classify_interval(s, one);
  CHECK(rep.bound.empty());
  CHECK(rep.passes);
}

TEST_CASE("no slack anywhere: infinite multiplier and the idle mechanism") {
  const TypeDistribution d({{"A", 1, 1, 1}, {"B", 1, 2, 1}});
  const auto s = solve_participation(d, 5.0);
  CHECK_FALSE(s.y_finite());
  CHECK(s.Q_star == 0.0);
  CHECK(s.W_star == 0.0);
  for (double p : s.mechanism.P) CHECK(p == 0.0);
}

TEST_CASE("ordered types") {
  SUBCASE("two types with a small breakage rate") {
    const TypeDistribution d({{"A", 1, 2, 1}, {"B", 1, 1, 1}});
    const auto s = solve_participation(d, 0.1);
    const auto rep = classify_interval(s, d);
    CHECK(rep.contiguous);
    CHECK(rep.passes);
  }
  SUBCASE("valuation falling with cost is rejected") {
    const TypeDistribution d({{"A", 10, 2, 1}, {"B", 1, 1, 1}});
    const auto s = solve_participation(d, 1.0);
    CHECK_THROWS_AS(classify_interval(s, d), NotOrderedError);
  }
  SUBCASE("random ordered instances") {
    Gen gen(31);
    for (int rep = 0; rep < 200; ++rep) {
      const int n = gen.integer(2, 7);
      std::vector<double> c(n), nu(n);
      for (int i = 0; i < n; ++i) {
        c[i] = gen.uniform(0.1, 10);
        nu[i] = gen.uniform(0.05, 10);
      }
      std::sort(c.begin(), c.end());
      std::sort(nu.begin(), nu.end(), std::greater<>());
      std::vector<AgentType> types;
      for (int i = 0; i < n; ++i) types.push_back({"t" + std::to_string(i), nu[i] * c[i], c[i], gen.uniform(0.2, 1.5)});
      const TypeDistribution d(types);
      const double rho = gen.log_uniform(0.1, 10);
      const auto s = solve_participation(d, rho);
      const auto r = classify_interval(s, d);
      CAPTURE(rep);
      CHECK(r.passes);
    }
  }
}

TEST_CASE("random instances: invariants of the saddle") {
  Gen gen(47);
  for (int rep = 0; rep < 250; ++rep) {
    const auto d = gen.instance(1, 6);
    const double rho = gen.log_uniform(0.1, 10);
    const auto s = solve_participation(d, rho);
    const auto fb = solve_first_best(d, rho);
    CAPTURE(rep);

    const auto f = check_feasible(s.mechanism, d, rho, Family::balance | Family::simplex | Family::participation, 1e-9);
    CHECK(f.ok());
    CHECK(s.W_star <= fb.W_fb + 1e-9);
    CHECK(s.W_star == doctest::Approx(welfare(s.mechanism, d)).epsilon(1e-12));
    CHECK(s.W_star == doctest::Approx(dense_grid_welfare(d, rho, 20000)).epsilon(2e-3).scale(1.0));
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(s.mechanism.R[i] == s.Q_star);
      const double util = agent_utility(d[i], s.mechanism.R[i], s.mechanism.P[i]);
      CHECK(util >= -1e-9);
      if (s.classes[i] == ContributionClass::bound) CHECK(std::abs(util) <= 1e-8);
    }

    if (s.y_finite()) {
      CHECK(s.y_star >= fb.y_fb - 1e-8);
      if (s.W_star < fb.W_fb - 1e-6) CHECK(s.y_star > fb.y_fb + 1e-6);
      // Saddle inequalities on a grid.
      const double l0 = reduced_lagrangian(s.Q_star, s.y_star, d, rho);
      CHECK(l0 == doctest::Approx(s.W_star).epsilon(1e-9).scale(1.0));
      for (int k = 0; k <= 100; ++k) {
        const double q = k / 100.0;
        const double y = 3.0 * s.y_star * k / 100.0;
        CHECK(reduced_lagrangian(q, s.y_star, d, rho) <= l0 + 1e-9);
        CHECK(reduced_lagrangian(s.Q_star, y, d, rho) >= l0 - 1e-9);
      }
    }
  }
}

TEST_CASE("uptime falls with the breakage rate") {
  Gen gen(53);
  for (int rep = 0; rep < 40; ++rep) {
    const auto d = gen.instance(1, 6);
    double prev = 2.0;
    for (int k = 0; k < 24; ++k) {
      const double rho = 0.05 * std::pow(1000.0, k / 23.0);
      const auto s = solve_participation(d, rho);
      CHECK(s.Q_star <= prev + 1e-9);
      prev = s.Q_star;
    }
  }
}

TEST_CASE("argument checks") {
  CHECK_THROWS_AS(solve_participation(example2(), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_participation(example2(), 1.0, -1.0), std::invalid_argument);
}
