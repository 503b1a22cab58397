#include "upkeep/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "upkeep/simplex.hpp"

namespace upkeep {

void GridSpec::validate() const {
  if (q_points < 3) throw std::invalid_argument("GridSpec: q_points must be >= 3");
  if (refine_rounds < 0) throw std::invalid_argument("GridSpec: refine_rounds must be >= 0");
  if (!(lp_tol > 0.0)) throw std::invalid_argument("GridSpec: lp_tol must be positive");
}

namespace {

struct Best {
  double W = -kInf;
  double Q = 0.0;
};

/// Coarse pass on [0, 1], then re-grid +-2 cells around the best point.
template <class F>
Best refine_search(F&& welfare_at, const GridSpec& g, Exec exec) {
  g.validate();
  const auto q = static_cast<std::size_t>(g.q_points);
  double lo = 0.0, hi = 1.0;
  Best best;
  for (int round = 0; round <= g.refine_rounds; ++round) {
    std::vector<double> pts(q);
    for (std::size_t k = 0; k < q; ++k)
      pts[k] = k + 1 == q ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(q - 1);
    const auto vals = evaluate_grid(q, [&](std::size_t k) { return welfare_at(pts[k]); }, exec);
    const std::size_t k = argmax_first(vals);
    if (k == q) break;
    if (vals[k] > best.W || (vals[k] == best.W && pts[k] < best.Q)) best = {vals[k], pts[k]};
    lo = pts[k >= 2 ? k - 2 : 0];
    hi = pts[std::min(k + 2, q - 1)];
  }
  return best;
}

}  // namespace

double greedy_fill_welfare(double Q, const TypeDistribution& d, double rho, PrimalMode mode,
                           std::vector<double>* P) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a].c < d[b].c; });

  double need = rho * Q;
  double cost = 0.0;
  if (P) P->assign(n, 0.0);
  for (std::size_t i : order) {
    if (need <= 0.0) break;
    const double level =
        mode == PrimalMode::first_best ? 1.0 - Q : std::min(1.0 - Q, Q * d[i].nu());
    const double cap = std::max(level, 0.0) * d[i].mass;
    const double fill = std::min(cap, need);
    need -= fill;
    cost += d[i].c * fill;
    if (P && d[i].mass > 0.0) (*P)[i] = fill / d[i].mass;
  }
  if (need > 1e-14 * std::max(1.0, rho)) return -kInf;
  return Q * d.u_bar() - cost;
}

GridResult primal_grid_welfare(const TypeDistribution& d, double rho, PrimalMode mode,
                               const GridSpec& g, Exec exec) {
  const auto best =
      refine_search([&](double Q) { return greedy_fill_welfare(Q, d, rho, mode); }, g, exec);
  GridResult res;
  res.Q = best.Q;
  res.W = greedy_fill_welfare(best.Q, d, rho, mode, &res.P);
  return res;
}

double lp_screening_at(double Q, const TypeDistribution& d, double rho, double lp_tol,
                       Mechanism* out) {
  const std::size_t n = d.size();
  LinearProgram lp;
  lp.objective.assign(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    lp.objective[i] = d[i].mass * d[i].u;
    lp.objective[n + i] = -d[i].mass * d[i].c;
  }
  auto row = [&] { return std::vector<double>(2 * n, 0.0); };
  for (std::size_t i = 0; i < n; ++i) {
    auto r = row();
    r[i] = 1.0;
    lp.add_le(r, Q);
    auto p = row();
    p[n + i] = 1.0;
    lp.add_le(p, 1.0 - Q);
    // participation, in units of c: R nu - P >= 0
    auto part = row();
    part[i] = -d[i].nu();
    part[n + i] = 1.0;
    lp.add_le(part, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto ic = row();
      ic[j] += d[i].nu();
      ic[n + j] -= 1.0;
      ic[i] -= d[i].nu();
      ic[n + i] += 1.0;
      lp.add_le(ic, 0.0);
    }
  }
  auto bal = row();
  for (std::size_t i = 0; i < n; ++i) bal[n + i] = d[i].mass;
  lp.add_eq(bal, rho * Q);

  const auto res = solve_lp(lp, lp_tol);
  if (res.status != LpStatus::optimal) return -kInf;
  if (out) {
    out->Q = Q;
    out->R.assign(res.x.begin(), res.x.begin() + static_cast<long>(n));
    out->P.assign(res.x.begin() + static_cast<long>(n), res.x.end());
  }
  return res.value;
}

LpGridResult lp_screening_welfare(const TypeDistribution& d, double rho, const GridSpec& g,
                                  Exec exec) {
  if (d.size() > kLpOracleMaxTypes)
    throw TooManyTypesError("lp_screening_welfare: at most 8 types supported");
  const auto best =
      refine_search([&](double Q) { return lp_screening_at(Q, d, rho, g.lp_tol); }, g, exec);
  LpGridResult res;
  res.Q = best.Q;
  res.W = lp_screening_at(best.Q, d, rho, g.lp_tol, &res.mechanism);
  return res;
}

namespace {

double menu_value(const std::vector<MonopolyBuyer>& vals, double r0, double nu0, double nu1,
                  double cap) {
  // Below nu0: (0, 0). [nu0, nu1): (r0, r0 nu0). From nu1: (1, r0 nu0 + (1 - r0) nu1).
  const double p_low = r0 * nu0;
  const double p_high = std::isfinite(nu1) ? p_low + (1.0 - r0) * nu1 : kInf;
  if (p_low > cap * (1.0 + 1e-12) || (std::isfinite(nu1) && p_high > cap * (1.0 + 1e-12)))
    return -kInf;
  double v = 0.0;
  for (const auto& b : vals) {
    double r = 0.0, p = 0.0;
    if (b.nu_hat >= nu1) {
      r = 1.0;
      p = p_high;
    } else if (b.nu_hat >= nu0) {
      r = r0;
      p = p_low;
    }
    v += b.surplus_weight * (r * b.nu_hat - p) + b.payment_weight * p;
  }
  return v;
}

}  // namespace

double menu_grid_oracle(const std::vector<MonopolyBuyer>& vals, double cap, double resolution,
                        Exec exec) {
  if (!(resolution > 0.0)) throw std::invalid_argument("menu_grid_oracle: resolution must be positive");
  if (!(cap > 0.0)) throw std::invalid_argument("menu_grid_oracle: cap must be positive");
  if (vals.empty()) return 0.0;
  double top = 0.0;
  for (const auto& b : vals) {
    if (!(b.nu_hat >= 0.0)) throw ValidationError("menu_grid_oracle: valuations must be >= 0");
    top = std::max(top, b.nu_hat);
  }
  const auto steps = static_cast<std::size_t>(std::ceil((top + resolution) / resolution));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) grid[k] = resolution * static_cast<double>(k);

  const auto per_nu0 = evaluate_grid(
      grid.size(),
      [&](std::size_t a) {
        const double nu0 = grid[a];
        // Single step at nu0 with the largest allocation the cap allows.
        double best = std::max(0.0, menu_value(vals, nu0 > cap ? cap / nu0 : 1.0, nu0, kInf, cap));
        for (std::size_t b = a + 1; b < grid.size(); ++b) {
          const double nu1 = grid[b];
          // Objective is linear in r0: check both ends of the feasible range.
          double r_lo = 0.0;
          if (nu1 > cap) {
            if (nu0 >= cap) continue;
            r_lo = (nu1 - cap) / (nu1 - nu0);
          }
          best = std::max({best, menu_value(vals, r_lo, nu0, nu1, cap),
                           menu_value(vals, 1.0, nu0, nu1, cap)});
        }
        return best;
      },
      exec);
  return *std::max_element(per_nu0.begin(), per_nu0.end());
}

}  // namespace upkeep
