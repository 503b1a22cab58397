#include "upkeep/first_best.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace upkeep {

namespace {

double excess_cost(double y, const TypeDistribution& d) {
  double s = 0.0;
  for (const auto& t : d.types()) s += t.mass * std::max(y - t.c, 0.0);
  return s;
}

void require_rho(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw std::invalid_argument("breakage rate rho must be positive and finite");
}

}  // namespace

double fb_threshold_gap(double y, const TypeDistribution& d, double rho) {
  return (d.u_bar() - rho * y) - excess_cost(y, d);
}

double fb_dual_value(double y, const TypeDistribution& d, double rho) {
  return std::max(d.u_bar() - rho * y, excess_cost(y, d));
}

FirstBestSolution solve_first_best(const TypeDistribution& d, double rho, double tol) {
  require_rho(rho);
  if (!(tol > 0.0)) throw std::invalid_argument("solve_first_best: tol must be positive");
  if (!(d.total_mass() > 0.0)) throw DegenerateError("solve_first_best: zero total mass");

  FirstBestSolution sol;
  const double upper = d.u_bar() / rho;
  const double root_tol = tol * std::max(1.0, upper);

  // gap(0) = u_bar > 0 and gap(u_bar / rho) <= 0.
  double lo = 0.0, hi = upper;
  while (hi - lo > root_tol && sol.iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    if (fb_threshold_gap(mid, d, rho) > 0.0)
      lo = mid;
    else
      hi = mid;
    ++sol.iterations;
  }
  double y = 0.5 * (lo + hi);

  // The gap is linear between cost atoms; solve that piece exactly.
  double m_below = 0.0, mc_below = 0.0;
  for (const auto& t : d.types()) {
    if (t.c < y) {
      m_below += t.mass;
      mc_below += t.mass * t.c;
    }
  }
  const double y_lin = (d.u_bar() + mc_below) / (rho + m_below);
  if (y_lin >= lo - root_tol && y_lin <= hi + root_tol) y = y_lin;
  sol.y_fb = y;

  // Balance with the strict set {c < y}; atoms at y receive marginal_fraction = 0.
  double m_strict = 0.0;
  for (const auto& t : d.types())
    if (t.c < y - root_tol) m_strict += t.mass;
  sol.marginal_fraction = 0.0;
  sol.Q_fb = m_strict / (rho + m_strict);

  const std::size_t n = d.size();
  sol.mechanism.Q = sol.Q_fb;
  sol.mechanism.R.assign(n, sol.Q_fb);
  sol.mechanism.P.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i].c < y - root_tol)
      sol.mechanism.P[i] = 1.0 - sol.Q_fb;
    else if (d[i].c <= y + root_tol)
      sol.mechanism.P[i] = (1.0 - sol.Q_fb) * sol.marginal_fraction;
  }
  sol.W_fb = welfare(sol.mechanism, d);
  return sol;
}

}  // namespace upkeep
