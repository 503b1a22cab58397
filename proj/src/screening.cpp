#include "upkeep/screening.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace upkeep {

namespace {

bool same_valuation(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(a, b)); }

// ---------------------------------------------------------------------------
// Bounded-payment monopoly.
//
// With valuations sorted v_1 < ... < v_G (v_0 = 0), an IC and IR menu is an
// allocation r that jumps by a_j >= 0 at group j with payment increment b_j
// in [v_{j-1} a_j, v_j a_j]. The cap binds only through sum a <= 1 and
// sum b <= 1. Writing the menu as a measure over jump options (j, t) with
// t in {v_{j-1}, v_j}, the objective is linear with value A_j + t B_j per
// unit, and an optimal vertex uses at most two options.
// ---------------------------------------------------------------------------

struct JumpOption {
  std::size_t group;
  double t;
  double value;
};

}  // namespace

MonopolyResult bounded_monopoly_solve(const std::vector<MonopolyBuyer>& buyers) {
  MonopolyResult res;
  const std::size_t n = buyers.size();
  res.r.assign(n, 0.0);
  res.p.assign(n, 0.0);
  if (n == 0) return res;
  for (const auto& b : buyers) {
    if (!(b.nu_hat >= 0.0) || !std::isfinite(b.nu_hat))
      throw ValidationError("bounded_monopoly_solve: valuations must be finite and >= 0");
    if (!std::isfinite(b.surplus_weight) || !std::isfinite(b.payment_weight))
      throw ValidationError("bounded_monopoly_solve: weights must be finite");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return buyers[a].nu_hat < buyers[b].nu_hat; });

  // Pool equal valuations.
  std::vector<double> v, ws, wp;
  std::vector<std::size_t> group_of(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& b = buyers[order[k]];
    if (v.empty() || !same_valuation(v.back(), b.nu_hat)) {
      v.push_back(b.nu_hat);
      ws.push_back(0.0);
      wp.push_back(0.0);
    }
    ws.back() += b.surplus_weight;
    wp.back() += b.payment_weight;
    group_of[order[k]] = v.size() - 1;
  }
  const std::size_t G = v.size();

  std::vector<double> A(G + 1, 0.0), B(G + 1, 0.0);
  for (std::size_t j = G; j-- > 0;) {
    A[j] = A[j + 1] + ws[j] * v[j];
    B[j] = B[j + 1] + wp[j] - ws[j];
  }

  std::vector<JumpOption> opts;
  for (std::size_t j = 0; j < G; ++j) {
    const double prev = j == 0 ? 0.0 : v[j - 1];
    opts.push_back({j, prev, A[j] + prev * B[j]});
    if (v[j] > prev) opts.push_back({j, v[j], A[j] + v[j] * B[j]});
  }

  double scale = 1.0;
  for (std::size_t j = 0; j < G; ++j)
    scale = std::max({scale, std::abs(ws[j]) * v[j], std::abs(wp[j]), std::abs(ws[j])});
  const double improve = 1e-14 * scale;

  double best = 0.0;
  std::array<double, 2> weight{0.0, 0.0};
  std::array<std::size_t, 2> pick_opt{opts.size(), opts.size()};

  // Ties go to the menu with more total allocation.
  double best_alloc = 0.0;
  auto offer = [&](double val, double alloc, std::array<std::size_t, 2> which, std::array<double, 2> w) {
    if (val > best + improve || (val >= best - improve && alloc > best_alloc + 1e-12)) {
      best = std::max(best, val);
      best_alloc = alloc;
      pick_opt = which;
      weight = w;
    }
  };
  for (std::size_t a = 0; a < opts.size(); ++a) {
    const double w = opts[a].t <= 1.0 ? 1.0 : 1.0 / opts[a].t;
    offer(w * opts[a].value, w, {a, opts.size()}, {w, 0.0});
  }
  for (std::size_t a = 0; a < opts.size(); ++a) {
    for (std::size_t b = 0; b < opts.size(); ++b) {
      const double t1 = opts[a].t, t2 = opts[b].t;
      if (!(t1 < 1.0 && t2 > 1.0)) continue;
      const double w1 = (t2 - 1.0) / (t2 - t1);
      const double w2 = (1.0 - t1) / (t2 - t1);
      offer(w1 * opts[a].value + w2 * opts[b].value, w1 + w2, {a, b}, {w1, w2});
    }
  }

  std::vector<double> jump(G, 0.0), pay(G, 0.0);
  for (int s = 0; s < 2; ++s) {
    if (pick_opt[s] >= opts.size()) continue;
    const auto& o = opts[pick_opt[s]];
    jump[o.group] += weight[s];
    pay[o.group] += weight[s] * o.t;
  }
  double r_acc = 0.0, p_acc = 0.0;
  std::vector<double> gr(G), gp(G);
  for (std::size_t j = 0; j < G; ++j) {
    r_acc += jump[j];
    p_acc += pay[j];
    gr[j] = std::min(r_acc, 1.0);
    gp[j] = std::min(p_acc, 1.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    res.r[i] = gr[group_of[i]];
    res.p[i] = gp[group_of[i]];
  }
  res.value = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    res.value += buyers[i].surplus_weight * (res.r[i] * buyers[i].nu_hat - res.p[i]) +
                 buyers[i].payment_weight * res.p[i];
  return res;
}

IcLagrangian ic_lagrangian(double Q, double y, const TypeDistribution& d, double rho) {
  IcLagrangian out;
  const std::size_t n = d.size();
  if (Q <= 0.0) {
    out.mechanism = Mechanism::zero(n);
    out.value = 0.0;
    return out;
  }
  if (Q >= 1.0) {
    // Contributions are impossible; free full access is optimal.
    out.mechanism = Mechanism{1.0, std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)};
    out.value = d.u_bar() - rho * y;
    return out;
  }
  const double odds = Q / (1.0 - Q);
  std::vector<MonopolyBuyer> buyers(n);
  for (std::size_t i = 0; i < n; ++i)
    buyers[i] = {d[i].nu() * odds, d[i].mass * d[i].c, d[i].mass * y};
  const auto menu = bounded_monopoly_solve(buyers);
  out.mechanism.Q = Q;
  out.mechanism.R.resize(n);
  out.mechanism.P.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.mechanism.R[i] = Q * menu.r[i];
    out.mechanism.P[i] = (1.0 - Q) * menu.p[i];
  }
  out.value = (1.0 - Q) * menu.value - rho * Q * y;
  return out;
}

namespace {

struct ScalarMax {
  double x = 0.0;
  double value = -kInf;
};

/// Maximizes a concave function on [0, 1]: scan the given points plus a
/// uniform grid, then golden-section search inside the best bracket.
template <class F>
ScalarMax maximize_concave(F&& f, std::vector<double> pts, double xtol) {
  for (int k = 0; k <= 64; ++k) pts.push_back(k / 64.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  ScalarMax best;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double v = f(pts[k]);
    if (v > best.value) {
      best = {pts[k], v};
      best_k = k;
    }
  }
  double a = pts[best_k > 0 ? best_k - 1 : 0];
  double b = pts[std::min(best_k + 1, pts.size() - 1)];
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && b - a > xtol; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  for (auto [x, v] : {std::pair{x1, f1}, std::pair{x2, f2}})
    if (v > best.value) best = {x, v};
  return best;
}

std::vector<double> kink_points(const TypeDistribution& d) {
  std::vector<double> pts;
  for (const auto& t : d.types()) pts.push_back(1.0 / (1.0 + t.nu()));
  return pts;
}

// ---------------------------------------------------------------------------
// Tier-structured primal. For a fixed assignment of nu-sorted groups to
// OUT / partial / full tiers the problem is a linear program in at most three
// unknowns (Q, R_hat, P_hat), solved by vertex enumeration.
// ---------------------------------------------------------------------------

template <std::size_t K>
struct SmallLp {
  std::array<double, K> objective{};
  std::array<double, K> eq{};
  double eq_rhs = 0.0;
  std::vector<std::array<double, K>> rows;
  std::vector<double> rhs;

  void le(std::array<double, K> a, double b) {
    rows.push_back(a);
    rhs.push_back(b);
  }
};

template <std::size_t K>
bool solve_square(std::array<std::array<double, K>, K> m, std::array<double, K> b,
                  std::array<double, K>& x) {
  for (std::size_t c = 0; c < K; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < K; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (std::abs(m[piv][c]) < 1e-13) return false;
    std::swap(m[piv], m[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = c + 1; r < K; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < K; ++k) m[r][k] -= f * m[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = K; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < K; ++k) s -= m[c][k] * x[k];
    x[c] = s / m[c][c];
  }
  return true;
}

template <std::size_t K>
std::optional<std::array<double, K>> solve_lp(const SmallLp<K>& lp, double feas_tol) {
  static_assert(K == 2 || K == 3);
  std::optional<std::array<double, K>> best;
  double best_val = -kInf;
  const std::size_t m = lp.rows.size();

  auto consider = [&](const std::array<double, K>& x) {
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += lp.rows[r][k] * x[k];
      if (s > lp.rhs[r] + feas_tol * (1.0 + std::abs(lp.rhs[r]))) return;
    }
    double v = 0.0;
    for (std::size_t k = 0; k < K; ++k) v += lp.objective[k] * x[k];
    if (v > best_val + 1e-13 * std::max(1.0, std::abs(v))) {
      best_val = v;
      best = x;
    }
  };

  std::array<std::array<double, K>, K> mat{};
  std::array<double, K> b{};
  std::array<double, K> x{};
  mat[0] = lp.eq;
  b[0] = lp.eq_rhs;
  if constexpr (K == 2) {
    for (std::size_t i = 0; i < m; ++i) {
      mat[1] = lp.rows[i];
      b[1] = lp.rhs[i];
      if (solve_square<K>(mat, b, x)) consider(x);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        mat[1] = lp.rows[i];
        mat[2] = lp.rows[j];
        b[1] = lp.rhs[i];
        b[2] = lp.rhs[j];
        if (solve_square<K>(mat, b, x)) consider(x);
      }
    }
  }
  return best;
}

struct Group {
  double nu = 0.0;
  double mass = 0.0;
  double mu = 0.0;  ///< sum mass * u
  double mc = 0.0;  ///< sum mass * c
  std::vector<std::size_t> members;
};

std::vector<Group> valuation_groups(const TypeDistribution& d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a].nu() < d[b].nu(); });
  std::vector<Group> groups;
  for (std::size_t i : order) {
    if (groups.empty() || !same_valuation(groups.back().nu, d[i].nu())) {
      groups.emplace_back();
      groups.back().nu = d[i].nu();
    }
    auto& g = groups.back();
    g.mass += d[i].mass;
    g.mu += d[i].mass * d[i].u;
    g.mc += d[i].mass * d[i].c;
    g.members.push_back(i);
  }
  return groups;
}

struct TierCandidate {
  double W = -kInf;
  Mechanism mechanism;
  int tiers = 0;
};

TierCandidate best_tiered_mechanism(const TypeDistribution& d, double rho) {
  const auto groups = valuation_groups(d);
  const std::size_t G = groups.size();
  const std::size_t n = d.size();
  const double feas_tol = 1e-11;

  TierCandidate best;
  best.W = 0.0;
  best.mechanism = Mechanism::zero(n);
  const double improve = 1e-12 * std::max({1.0, d.u_bar(), d.c_bar()});

  auto sums = [&](std::size_t from, std::size_t to) {
    Group s;
    for (std::size_t g = from; g < to; ++g) {
      s.mass += groups[g].mass;
      s.mu += groups[g].mu;
      s.mc += groups[g].mc;
    }
    return s;
  };

  auto offer = [&](TierCandidate&& cand) {
    if (cand.W > best.W + improve || (cand.W > best.W - improve && cand.tiers < best.tiers))
      best = std::move(cand);
  };

  for (std::size_t lo = 0; lo < G; ++lo) {
    const double nu_out = lo > 0 ? groups[lo - 1].nu : -1.0;

    // One tier (Q, P_hat) for groups >= lo.
    {
      const auto top = sums(lo, G);
      SmallLp<2> lp;
      lp.objective = {top.mu, -top.mc};
      lp.eq = {rho, -top.mass};
      lp.eq_rhs = 0.0;
      lp.le({-1, 0}, 0);
      lp.le({1, 0}, 1);
      lp.le({0, -1}, 0);
      lp.le({1, 1}, 1);
      lp.le({-groups[lo].nu, 1}, 0);
      if (lo > 0) lp.le({nu_out, -1}, 0);
      if (auto x = solve_lp(lp, feas_tol)) {
        const double Q = std::clamp((*x)[0], 0.0, 1.0);
        const double P = std::clamp((*x)[1], 0.0, 1.0 - Q);
        TierCandidate cand;
        cand.mechanism = Mechanism::zero(n);
        cand.mechanism.Q = Q;
        for (std::size_t g = lo; g < G; ++g)
          for (std::size_t i : groups[g].members) {
            cand.mechanism.R[i] = Q;
            cand.mechanism.P[i] = P;
          }
        cand.W = welfare(cand.mechanism, d);
        cand.tiers = Q > 0.0 ? 1 : 0;
        offer(std::move(cand));
      }
    }

    // Partial tier (R_hat, P_hat) for [lo, hi), full tier (Q, 1 - Q) for >= hi.
    for (std::size_t hi = lo + 1; hi < G; ++hi) {
      const auto mid = sums(lo, hi);
      const auto top = sums(hi, G);
      SmallLp<3> lp;  // x = (Q, R, P)
      lp.objective = {top.mu + top.mc, mid.mu, -mid.mc};
      lp.eq = {rho + top.mass, 0.0, -mid.mass};
      lp.eq_rhs = top.mass;
      lp.le({-1, 0, 0}, 0);
      lp.le({1, 0, 0}, 1);
      lp.le({0, -1, 0}, 0);
      lp.le({-1, 1, 0}, 0);
      lp.le({0, 0, -1}, 0);
      lp.le({1, 0, 1}, 1);
      if (lo > 0) {
        lp.le({0, nu_out, -1}, 0);
        lp.le({nu_out + 1.0, 0, 0}, 1);
      }
      for (double nu : {groups[lo].nu, groups[hi - 1].nu}) {
        lp.le({0, -nu, 1}, 0);
        lp.le({nu + 1.0, -nu, 1}, 1);
      }
      for (double nu : {groups[hi].nu, groups[G - 1].nu}) {
        lp.le({-(nu + 1.0), 0, 0}, -1);
        lp.le({-(nu + 1.0), nu, -1}, -1);
      }
      if (auto x = solve_lp(lp, feas_tol)) {
        const double Q = std::clamp((*x)[0], 0.0, 1.0);
        const double R = std::clamp((*x)[1], 0.0, Q);
        const double P = std::clamp((*x)[2], 0.0, 1.0 - Q);
        TierCandidate cand;
        cand.mechanism = Mechanism::zero(n);
        cand.mechanism.Q = Q;
        for (std::size_t g = lo; g < G; ++g)
          for (std::size_t i : groups[g].members) {
            cand.mechanism.R[i] = g < hi ? R : Q;
            cand.mechanism.P[i] = g < hi ? P : 1.0 - Q;
          }
        cand.W = welfare(cand.mechanism, d);
        cand.tiers = 2;
        offer(std::move(cand));
      }
    }
  }
  return best;
}

void describe_tiers(ScreeningSolution& sol, double tol) {
  const auto& m = sol.mechanism;
  const std::size_t n = m.R.size();
  std::vector<std::pair<double, double>> bundles;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.R[i] <= tol && m.P[i] <= tol) continue;
    bool known = false;
    for (const auto& b : bundles)
      if (std::abs(b.first - m.R[i]) <= tol && std::abs(b.second - m.P[i]) <= tol) known = true;
    if (!known) bundles.emplace_back(m.R[i], m.P[i]);
  }
  std::sort(bundles.begin(), bundles.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  sol.tiers.clear();
  for (const auto& [R, P] : bundles)
    sol.tiers.push_back({m.Q > 0.0 ? R / m.Q : 0.0, m.Q < 1.0 ? P / (1.0 - m.Q) : 0.0});
  sol.assignment.assign(n, kOut);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < bundles.size(); ++k)
      if (std::abs(bundles[k].first - m.R[i]) <= tol && std::abs(bundles[k].second - m.P[i]) <= tol)
        sol.assignment[i] = static_cast<int>(k);
}

}  // namespace

ScreeningSolution solve_screening(const TypeDistribution& d, double rho, double tol) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw std::invalid_argument("breakage rate rho must be positive and finite");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_screening: tol must be positive");
  if (!(d.total_mass() > 0.0)) throw DegenerateError("solve_screening: zero total mass");

  ScreeningSolution sol;
  sol.rho = rho;
  sol.nu.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) sol.nu[i] = d[i].nu();

  const auto kinks = kink_points(d);
  const double xtol = 1e-11;

  // Largest balance slack over IC mechanisms: revenue-maximizing menus.
  std::vector<MonopolyBuyer> buyers(d.size());
  auto slack_at = [&](double Q) {
    if (Q <= 0.0) return 0.0;
    if (Q >= 1.0) return -rho;
    const double odds = Q / (1.0 - Q);
    for (std::size_t i = 0; i < d.size(); ++i) buyers[i] = {d[i].nu() * odds, 0.0, d[i].mass};
    return (1.0 - Q) * bounded_monopoly_solve(buyers).value - rho * Q;
  };
  sol.max_slack = std::max(0.0, maximize_concave(slack_at, kinks, xtol).value);

  // Dual route: min over y of max over Q of the IC Lagrangian.
  auto phi = [&](double y) {
    return maximize_concave([&](double Q) { return ic_lagrangian(Q, y, d, rho).value; }, kinks,
                            xtol);
  };
  if (sol.max_slack > tol) {
    auto subgradient = [&](double y) {
      const auto best = phi(y);
      return -balance_residual(ic_lagrangian(best.x, y, d, rho).mechanism, d, rho);
    };
    double lo = 0.0;
    double hi = (d.u_bar() + d.c_bar()) / rho + d.max_cost() + 1.0;
    int doublings = 0;
    while (subgradient(hi) < 0.0 && doublings < 200) {
      lo = hi;
      hi *= 2.0;
      ++doublings;
    }
    const double y_tol = 1e-10 * std::max(1.0, hi);
    while (hi - lo > y_tol && sol.iterations < 300) {
      const double mid = 0.5 * (lo + hi);
      if (subgradient(mid) >= 0.0)
        hi = mid;
      else
        lo = mid;
      ++sol.iterations;
    }
    sol.y_star = hi;
    sol.W_dual = phi(hi).value;
  } else {
    sol.y_star = kInf;
  }

  // Primal route over two-tier menus gives the mechanism itself.
  auto best = best_tiered_mechanism(d, rho);
  sol.mechanism = std::move(best.mechanism);
  sol.Q_star = sol.mechanism.Q;
  sol.W_star = welfare(sol.mechanism, d);
  if (!sol.y_finite()) sol.W_dual = sol.W_star;
  describe_tiers(sol, 1e-10);
  return sol;
}

bool verify_structure(const ScreeningSolution& sol, double tol) {
  const auto& m = sol.mechanism;
  const std::size_t n = m.R.size();
  if (sol.nu.size() != n || m.P.size() != n) return false;

  std::vector<std::pair<double, double>> bundles;
  auto bundle_index = [&](std::size_t i) -> int {
    if (m.R[i] <= tol && m.P[i] <= tol) return -1;
    for (std::size_t k = 0; k < bundles.size(); ++k)
      if (std::abs(bundles[k].first - m.R[i]) <= tol && std::abs(bundles[k].second - m.P[i]) <= tol)
        return static_cast<int>(k);
    bundles.emplace_back(m.R[i], m.P[i]);
    return static_cast<int>(bundles.size() - 1);
  };
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = bundle_index(i);
  if (bundles.size() > 2) return false;

  // Rank bundles: OUT < lower tier < higher tier (by R, then P).
  int high = -1;
  if (bundles.size() == 2) {
    const auto& a = bundles[0];
    const auto& b = bundles[1];
    high = (a.first != b.first ? a.first > b.first : a.second > b.second) ? 0 : 1;
    if (std::abs(bundles[high].second - (1.0 - m.Q)) > tol) return false;
  } else if (bundles.size() == 1) {
    high = 0;
    if (std::abs(bundles[0].first - m.Q) > tol) return false;
  }
  auto rank = [&](std::size_t i) { return idx[i] < 0 ? 0 : (idx[i] == high ? 2 : 1); };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sol.nu[a] < sol.nu[b]; });
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t a = order[k - 1], b = order[k];
    if (same_valuation(sol.nu[a], sol.nu[b])) {
      if (idx[a] != idx[b]) return false;
    } else if (rank(b) < rank(a)) {
      return false;
    }
  }
  return true;
}

}  // namespace upkeep
