#include "upkeep/simplex.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace upkeep {

namespace {

constexpr double kPivotEps = 1e-12;

class Tableau {
public:
  Tableau(std::size_t rows, std::size_t cols)
      : m_(rows), n_(cols), a_(rows, std::vector<double>(cols + 1, 0.0)), basis_(rows, 0),
        reduced_(cols + 1, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a_[i][j]; }
  double& rhs(std::size_t i) { return a_[i][n_]; }
  std::vector<std::size_t>& basis() { return basis_; }

  /// Installs costs and recomputes reduced costs from the current basis.
  void set_costs(const std::vector<double>& cost) {
    cost_ = cost;
    for (std::size_t j = 0; j <= n_; ++j) {
      double s = j < n_ ? cost[j] : 0.0;
      for (std::size_t i = 0; i < m_; ++i) s -= cost[basis_[i]] * a_[i][j];
      reduced_[j] = s;
    }
  }

  double value() const { return -reduced_[n_]; }

  /// Runs Bland-rule pivots until optimal. Columns with allowed[j] false never enter.
  LpStatus optimize(const std::vector<bool>& allowed, int& pivots, int max_pivots) {
    while (true) {
      std::size_t enter = n_;
      for (std::size_t j = 0; j < n_; ++j) {
        if (allowed[j] && reduced_[j] > kPivotEps * 10) {
          enter = j;
          break;
        }
      }
      if (enter == n_) return LpStatus::optimal;
      std::size_t leave = m_;
      double best = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        if (a_[i][enter] <= kPivotEps) continue;
        const double ratio = a_[i][n_] / a_[i][enter];
        if (leave == m_ || ratio < best - 1e-15 ||
            (ratio <= best + 1e-15 && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave == m_) return LpStatus::unbounded;
      pivot(leave, enter);
      if (++pivots > max_pivots) return LpStatus::iteration_limit;
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    const double inv = 1.0 / a_[r][c];
    for (double& v : a_[r]) v *= inv;
    a_[r][c] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = a_[i][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) a_[i][j] -= f * a_[r][j];
      a_[i][c] = 0.0;
    }
    const double f = reduced_[c];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= n_; ++j) reduced_[j] -= f * a_[r][j];
      reduced_[c] = 0.0;
    }
    basis_[r] = c;
  }

private:
  std::size_t m_, n_;
  std::vector<std::vector<double>> a_;
  std::vector<std::size_t> basis_;
  std::vector<double> reduced_;
  std::vector<double> cost_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, double tol) {
  const std::size_t nx = lp.objective.size();
  const std::size_t n_le = lp.le_rows.size();
  const std::size_t n_eq = lp.eq_rows.size();
  if (lp.le_rhs.size() != n_le || lp.eq_rhs.size() != n_eq)
    throw std::invalid_argument("solve_lp: row and rhs counts differ");
  for (const auto& r : lp.le_rows)
    if (r.size() != nx) throw std::invalid_argument("solve_lp: row width mismatch");
  for (const auto& r : lp.eq_rows)
    if (r.size() != nx) throw std::invalid_argument("solve_lp: row width mismatch");

  const std::size_t m = n_le + n_eq;
  // Columns: x, one slack per <= row, one artificial per row that needs it.
  std::vector<int> art_of_row(m, -1);
  std::size_t n_art = 0;
  for (std::size_t i = 0; i < n_le; ++i)
    if (lp.le_rhs[i] < 0.0) art_of_row[i] = static_cast<int>(n_art++);
  for (std::size_t i = 0; i < n_eq; ++i) art_of_row[n_le + i] = static_cast<int>(n_art++);

  const std::size_t slack0 = nx, art0 = nx + n_le, ncols = nx + n_le + n_art;
  Tableau t(m, ncols);
  for (std::size_t i = 0; i < m; ++i) {
    const bool is_le = i < n_le;
    const auto& row = is_le ? lp.le_rows[i] : lp.eq_rows[i - n_le];
    double b = is_le ? lp.le_rhs[i] : lp.eq_rhs[i - n_le];
    const double sign = b < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < nx; ++j) t.at(i, j) = sign * row[j];
    if (is_le) t.at(i, slack0 + i) = sign;
    t.rhs(i) = sign * b;
    if (art_of_row[i] >= 0) {
      const std::size_t a = art0 + static_cast<std::size_t>(art_of_row[i]);
      t.at(i, a) = 1.0;
      t.basis()[i] = a;
    } else {
      t.basis()[i] = slack0 + i;
    }
  }

  LpResult res;
  const int max_pivots = 50000;
  std::vector<bool> allowed(ncols, true);

  if (n_art > 0) {
    std::vector<double> phase1(ncols, 0.0);
    for (std::size_t j = art0; j < ncols; ++j) phase1[j] = -1.0;
    t.set_costs(phase1);
    const auto st = t.optimize(allowed, res.pivots, max_pivots);
    if (st == LpStatus::iteration_limit) {
      res.status = st;
      return res;
    }
    double scale = 1.0;
    for (double b : lp.le_rhs) scale = std::max(scale, std::abs(b));
    for (double b : lp.eq_rhs) scale = std::max(scale, std::abs(b));
    if (t.value() < -tol * scale) {
      res.status = LpStatus::infeasible;
      return res;
    }
    // Drive zero-level artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis()[i] < art0) continue;
      for (std::size_t j = 0; j < art0; ++j) {
        if (std::abs(t.at(i, j)) > 1e-9) {
          t.pivot(i, j);
          break;
        }
      }
    }
    for (std::size_t j = art0; j < ncols; ++j) allowed[j] = false;
  }

  std::vector<double> phase2(ncols, 0.0);
  for (std::size_t j = 0; j < nx; ++j) phase2[j] = lp.objective[j];
  t.set_costs(phase2);
  res.status = t.optimize(allowed, res.pivots, max_pivots);
  if (res.status != LpStatus::optimal) return res;

  res.x.assign(nx, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (t.basis()[i] < nx) res.x[t.basis()[i]] = t.rhs(i);
  res.value = 0.0;
  for (std::size_t j = 0; j < nx; ++j) res.value += lp.objective[j] * res.x[j];
  return res;
}

}  // namespace upkeep
