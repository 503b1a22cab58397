// Serial reference vs OpenMP timings for the grid oracles, the sweep and the
// simulation replications. Results must agree exactly; the timing ratio is
// what this target reports.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "upkeep/first_best.hpp"
#include "upkeep/kernels.hpp"
#include "upkeep/oracle.hpp"
#include "upkeep/participation.hpp"
#include "upkeep/sim.hpp"

using namespace upkeep;

namespace {

double seconds(const std::function<double()>& f, double& result) {
  const auto t0 = std::chrono::steady_clock::now();
  result = f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void compare(const std::string& name, const std::function<double(Exec)>& f) {
  double a = 0.0, b = 0.0;
  const double ts = seconds([&] { return f(Exec::serial); }, a);
  const double tp = seconds([&] { return f(Exec::parallel); }, b);
  std::printf("%-28s serial %8.3f s  omp %8.3f s  speedup %5.2fx  %s\n", name.c_str(), ts, tp,
              tp > 0 ? ts / tp : 0.0, a == b ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  const TypeDistribution d({{"A", 3.0, 2.5, 1.0},
                            {"B", 4.0, 2.0, 1.0},
                            {"C", 10.0, 1.25, 1.0},
                            {"D", 1.5, 0.4, 0.5},
                            {"E", 6.0, 3.0, 0.7}});
  const double rho = 2.5;
  std::printf("threads: %d\n", worker_threads());

  compare("primal grid (participation)", [&](Exec e) {
    return primal_grid_welfare(d, rho, PrimalMode::participation, {}, e).W;
  });
  compare("lp screening grid", [&](Exec e) {
    GridSpec g;
    g.q_points = 401;
    return lp_screening_welfare(d, rho, g, e).W;
  });
  compare("menu grid oracle", [&](Exec e) {
    std::vector<MonopolyBuyer> vals{{0.4, 1.0, 0.5}, {1.1, 0.5, -0.2}, {1.9, 0.3, 1.0}, {2.7, 0.2, 0.8}};
    return menu_grid_oracle(vals, 1.0, 1e-3, e);
  });
  compare("rho sweep (64 points)", [&](Exec e) {
    const auto rows = parallel_map<double>(
        64, [&](std::size_t k) { return solve_participation(d, 0.05 * (1.0 + k)).W_star; }, e);
    double s = 0.0;
    for (double v : rows) s += v;
    return s;
  });
  compare("poisson replications (8)", [&](Exec e) {
    const auto sol = solve_participation(d, rho);
    SimOptions opt;
    opt.horizon = 2e4;
    opt.seed = 7;
    PhysicalParams phys;
    phys.rho = rho;
    const auto reps = replicate(SimKind::poisson, build_policy(sol.mechanism), d, phys, opt, 8, e);
    double s = 0.0;
    for (const auto& r : reps) s += r.Q_hat.value;
    return s;
  });
  return 0;
}
