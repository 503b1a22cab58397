#include "upkeep/participation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "upkeep/first_best.hpp"

namespace upkeep {

const char* to_string(ContributionClass c) {
  switch (c) {
    case ContributionClass::full: return "FULL";
    case ContributionClass::bound: return "BOUND";
    case ContributionClass::none: return "NONE";
  }
  return "?";
}

namespace {

double cap(double Q, double nu) { return std::min(1.0 - Q, Q * nu); }

/// {0, 1} and every kink 1 / (1 + nu), sorted and deduplicated.
std::vector<double> breakpoints(const TypeDistribution& d) {
  std::vector<double> pts{0.0, 1.0};
  for (const auto& t : d.types())
    if (t.mass > 0.0) pts.push_back(1.0 / (1.0 + t.nu()));
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

double atom_eps(double y) { return 1e-12 * std::max(1.0, std::abs(y)); }

/// Signed balance slack of the threshold mechanism at (Q, y), split into the
/// strict part {c < y} and the contribution capacity of the atom {c == y}.
struct BalanceSplit {
  double strict = 0.0;  ///< sum_{c<y} mass * cap - rho Q
  double atom = 0.0;    ///< sum_{c==y} mass * cap
};

BalanceSplit balance_split(double Q, double y, const TypeDistribution& d, double rho) {
  BalanceSplit b;
  const double eps = atom_eps(y);
  for (const auto& t : d.types()) {
    if (t.c < y - eps)
      b.strict += t.mass * cap(Q, t.nu());
    else if (t.c <= y + eps)
      b.atom += t.mass * cap(Q, t.nu());
  }
  b.strict -= rho * Q;
  return b;
}

struct Evaluated {
  std::vector<double> q;
  std::vector<double> value;
  double best = -kInf;
};

Evaluated evaluate(const std::vector<double>& pts, double y, const TypeDistribution& d,
                   double rho) {
  Evaluated e{pts, std::vector<double>(pts.size()), -kInf};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    e.value[k] = reduced_lagrangian(pts[k], y, d, rho);
    e.best = std::max(e.best, e.value[k]);
  }
  return e;
}

double slack_of(double Q, const TypeDistribution& d, double rho) {
  double s = -rho * Q;
  for (const auto& t : d.types()) s += t.mass * cap(Q, t.nu());
  return s;
}

/// Smallest Q in [qa, qb] (both breakpoints or between them) where
/// strict <= 0 <= strict + atom. Balance terms are linear between breakpoints.
std::optional<double> balanced_uptime(const std::vector<double>& pts, double qa, double qb,
                                      double y, const TypeDistribution& d, double rho,
                                      double slack_tol) {
  std::vector<double> seg;
  seg.push_back(qa);
  for (double p : pts)
    if (p > qa && p < qb) seg.push_back(p);
  if (qb > qa) seg.push_back(qb);

  auto feasible_at = [&](double q) {
    const auto b = balance_split(q, y, d, rho);
    return b.strict <= slack_tol && b.strict + b.atom >= -slack_tol;
  };
  if (seg.size() == 1) return feasible_at(qa) ? std::optional<double>(qa) : std::nullopt;

  // Exact roots first; widen by the slack tolerance only if that finds nothing.
  for (const double widen : {0.0, slack_tol}) {
    for (std::size_t k = 0; k + 1 < seg.size(); ++k) {
      const double q0 = seg[k], q1 = seg[k + 1];
      const auto b0 = balance_split(q0, y, d, rho);
      const auto b1 = balance_split(q1, y, d, rho);
      // Condition A: strict(t) <= 0; condition B: strict(t) + atom(t) >= 0; t in [0, 1].
      double t_lo = 0.0, t_hi = 1.0;
      auto restrict_le0 = [&](double v0, double v1) {  // v(t) <= 0
        const double dv = v1 - v0;
        if (std::abs(dv) <= 1e-300) {
          if (v0 > slack_tol) t_hi = -1.0;
          return;
        }
        const double root = -v0 / dv;
        if (dv > 0.0)
          t_hi = std::min(t_hi, root + widen / std::abs(dv));
        else
          t_lo = std::max(t_lo, root - widen / std::abs(dv));
      };
      restrict_le0(b0.strict, b1.strict);
      restrict_le0(-(b0.strict + b0.atom), -(b1.strict + b1.atom));
      if (t_lo <= t_hi && t_hi >= 0.0 && t_lo <= 1.0) {
        const double t = std::clamp(t_lo, 0.0, 1.0);
        return q0 + t * (q1 - q0);
      }
    }
  }
  return std::nullopt;
}

/// FULL / BOUND / NONE from the mechanism itself; rationed marginal types
/// fall into whichever class their utility indicates.
void assign_classes(ParticipationSolution& sol, const TypeDistribution& d) {
  const double ctol = 1e-9 * std::max(1.0, d.u_bar());
  const std::size_t n = d.size();
  sol.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = sol.mechanism.P[i];
    const double util = agent_utility(d[i], sol.mechanism.R[i], p);
    if (p <= ctol)
      sol.classes[i] = ContributionClass::none;
    else if (std::abs(util) <= ctol)
      sol.classes[i] = ContributionClass::bound;
    else
      sol.classes[i] = ContributionClass::full;
  }
}

ParticipationSolution infinite_branch(const TypeDistribution& d, double rho, double tol,
                                      double slater) {
  ParticipationSolution sol;
  sol.rho = rho;
  sol.y_star = kInf;
  sol.slater = slater;

  // g <= 0 is concave with g(0) = 0, so its zero set is [0, q1]; welfare is
  // compared across the candidate zeros.
  const auto pts = breakpoints(d);
  double best_q = 0.0, best_w = 0.0;
  for (double q : pts) {
    if (std::abs(slack_of(q, d, rho)) > tol) continue;
    double w = q * d.u_bar();
    for (const auto& t : d.types()) w -= t.mass * cap(q, t.nu()) * t.c;
    if (w > best_w + tol) {
      best_w = w;
      best_q = q;
    }
  }
  const std::size_t n = d.size();
  sol.Q_star = best_q;
  sol.mechanism.Q = best_q;
  sol.mechanism.R.assign(n, best_q);
  sol.mechanism.P.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.mechanism.P[i] = cap(best_q, d[i].nu());
  sol.W_star = welfare(sol.mechanism, d);
  sol.dual_value = sol.W_star;
  assign_classes(sol, d);
  return sol;
}

}  // namespace

double reduced_lagrangian(double Q, double y, const TypeDistribution& d, double rho) {
  double v = Q * (d.u_bar() - rho * y);
  for (const auto& t : d.types()) {
    const double gain = y - t.c;
    if (gain > 0.0) v += t.mass * cap(Q, t.nu()) * gain;
  }
  return v;
}

InnerMax inner_max_Q(double y, const TypeDistribution& d, double rho, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("inner_max_Q: tol must be positive");
  const auto e = evaluate(breakpoints(d), y, d, rho);
  const double vtol = tol * std::max(1.0, std::abs(e.best));
  for (std::size_t k = 0; k < e.q.size(); ++k)
    if (e.value[k] >= e.best - vtol) return {e.q[k], e.value[k]};
  return {e.q.back(), e.value.back()};
}

double slater_gap(const TypeDistribution& d, double rho, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("slater_gap: tol must be positive");
  double best = 0.0;
  for (double q : breakpoints(d)) best = std::max(best, slack_of(q, d, rho));
  return best;
}

ParticipationSolution solve_participation(const TypeDistribution& d, double rho, double tol) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw std::invalid_argument("breakage rate rho must be positive and finite");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_participation: tol must be positive");
  if (!(d.total_mass() > 0.0)) throw DegenerateError("solve_participation: zero total mass");

  const double slater = slater_gap(d, rho, tol);
  if (slater <= tol) return infinite_branch(d, rho, tol, slater);

  const auto pts = breakpoints(d);
  auto subgradient = [&](double y) {
    const double q = inner_max_Q(y, d, rho, 1e-13).Q;
    return balance_split(q, y, d, rho).strict;
  };

  ParticipationSolution sol;
  sol.rho = rho;
  sol.slater = slater;

  // The dual subgradient is negative at y = 0 (the inner max sits at Q = 1).
  double lo = 0.0;
  double hi = (d.u_bar() + d.c_bar()) / rho + d.max_cost() + 1.0;
  int doublings = 0;
  while (subgradient(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200) return infinite_branch(d, rho, tol, slater);
  }
  const double y_tol = tol * std::max(1.0, hi) * 1e-3;
  while (hi - lo > y_tol && sol.iterations < 400) {
    const double mid = 0.5 * (lo + hi);
    if (subgradient(mid) >= 0.0)
      hi = mid;
    else
      lo = mid;
    ++sol.iterations;
  }

  // phi*(y) is piecewise linear; its smallest minimizer is either a cost atom
  // or the crossing of the two affine pieces active at lo and hi.
  double y_star = hi;
  std::optional<double> atom;
  for (const auto& t : d.types())
    if (t.mass > 0.0 && t.c >= lo - atom_eps(lo) && t.c <= hi + atom_eps(hi))
      if (!atom || t.c < *atom) atom = t.c;
  if (atom) {
    y_star = *atom;
  } else {
    // No atom in the bracket: each breakpoint Q gives one affine piece
    // alpha + beta y, and phi* is their upper envelope. Its minimizer in the
    // bracket is a pairwise crossing.
    std::vector<std::pair<double, double>> lines;
    for (double q : pts) {
      double alpha = q * d.u_bar(), beta = -rho * q;
      for (const auto& t : d.types()) {
        if (t.c < hi) {
          alpha -= t.mass * cap(q, t.nu()) * t.c;
          beta += t.mass * cap(q, t.nu());
        }
      }
      lines.emplace_back(alpha, beta);
    }
    auto envelope = [&](double y) {
      double v = -kInf;
      for (const auto& [a, b] : lines) v = std::max(v, a + b * y);
      return v;
    };
    const double w = (hi - lo) + 1e-6 * std::max(1.0, hi);
    double best_val = envelope(hi);
    for (std::size_t a = 0; a < lines.size(); ++a) {
      for (std::size_t b = a + 1; b < lines.size(); ++b) {
        if (lines[a].second == lines[b].second) continue;
        const double y = (lines[a].first - lines[b].first) / (lines[b].second - lines[a].second);
        if (!std::isfinite(y) || y < lo - w || y > hi + w) continue;
        const double v = envelope(y);
        const double vt = 1e-14 * std::max(1.0, std::abs(best_val));
        if (v < best_val - vt || (v <= best_val + vt && y < y_star)) {
          best_val = std::min(best_val, v);
          y_star = y;
        }
      }
    }
  }

  // Balanced uptime inside the argmax set of l(.; y*).
  const double slack_tol = 1e-12 * std::max(1.0, rho + d.total_mass());
  std::optional<double> q_star;
  for (double rel : {1e-12, 1e-10, 1e-8, 1e-6}) {
    const auto e = evaluate(pts, y_star, d, rho);
    const double vtol = rel * std::max({1.0, std::abs(e.best), d.u_bar()});
    double qa = 1.0, qb = 0.0;
    for (std::size_t k = 0; k < e.q.size(); ++k) {
      if (e.value[k] >= e.best - vtol) {
        qa = std::min(qa, e.q[k]);
        qb = std::max(qb, e.q[k]);
      }
    }
    q_star = balanced_uptime(pts, qa, qb, y_star, d, rho, slack_tol);
    if (q_star) break;
    sol.exact_recovery = false;
  }
  if (!q_star) throw std::logic_error("solve_participation: no balanced saddle mechanism found");

  const double Q = *q_star;
  const auto split = balance_split(Q, y_star, d, rho);
  double f = 0.0;
  if (split.atom > 0.0) f = std::clamp(-split.strict / split.atom, 0.0, 1.0);

  const std::size_t n = d.size();
  sol.y_star = y_star;
  sol.Q_star = Q;
  sol.marginal_fraction = f;
  sol.mechanism.Q = Q;
  sol.mechanism.R.assign(n, Q);
  sol.mechanism.P.assign(n, 0.0);
  const double eps = atom_eps(y_star);
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i].c < y_star - eps)
      sol.mechanism.P[i] = cap(Q, d[i].nu());
    else if (d[i].c <= y_star + eps)
      sol.mechanism.P[i] = f * cap(Q, d[i].nu());
  }
  sol.W_star = welfare(sol.mechanism, d);
  sol.dual_value = inner_max_Q(y_star, d, rho, tol).value;

  assign_classes(sol, d);
  return sol;
}

IntervalReport classify_interval(const ParticipationSolution& sol, const TypeDistribution& d,
                                 double tol) {
  IntervalReport rep;
  const std::size_t n = d.size();
  rep.order.resize(n);
  std::iota(rep.order.begin(), rep.order.end(), std::size_t{0});
  std::stable_sort(rep.order.begin(), rep.order.end(), [&](std::size_t a, std::size_t b) {
    if (d[a].c != d[b].c) return d[a].c > d[b].c;
    return d[a].nu() < d[b].nu();
  });
  for (std::size_t k = 1; k < n; ++k) {
    const double prev = d[rep.order[k - 1]].nu(), cur = d[rep.order[k]].nu();
    if (cur < prev - 1e-12 * std::max(1.0, prev))
      throw NotOrderedError("types are not ordered: valuation decreases as cost decreases at '" +
                            d[rep.order[k]].id + "'");
  }

  // Active participation means zero utility. With Q* > 0 that is the BOUND
  // class; with Q* = 0 every type is active.
  const double ctol = 1e-9 * std::max(1.0, d.u_bar());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rep.order[k];
    if (std::abs(agent_utility(d[i], sol.mechanism.R.at(i), sol.mechanism.P.at(i))) <= ctol)
      rep.bound.push_back(k);
  }
  for (std::size_t k = 1; k < rep.bound.size(); ++k)
    if (rep.bound[k] != rep.bound[k - 1] + 1) rep.contiguous = false;

  const auto fb = solve_first_best(d, sol.rho, tol);
  rep.y_fb = fb.y_fb;
  rep.W_fb = fb.W_fb;
  rep.fb_attained = sol.W_star >= fb.W_fb - tol * std::max(1.0, std::abs(fb.W_fb));

  if (!rep.bound.empty()) {
    rep.span_hi = d[rep.order[rep.bound.front()]].c;
    rep.span_lo = d[rep.order[rep.bound.back()]].c;
    rep.contains_y_fb = rep.span_lo <= rep.y_fb + tol && rep.y_fb <= rep.span_hi + tol;
    double lower_edge = 0.0;
    for (std::size_t k = rep.bound.back() + 1; k < n; ++k)
      lower_edge = std::max(lower_edge, d[rep.order[k]].c);
    rep.contains_y_fb_extended = lower_edge <= rep.y_fb + tol && rep.y_fb <= sol.y_star + tol;
  }
  rep.passes = rep.fb_attained || (rep.contiguous && rep.contains_y_fb_extended);
  return rep;
}

}  // namespace upkeep
