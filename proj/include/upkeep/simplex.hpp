#pragma once

// Dense two-phase simplex with Bland's rule. Meant for the small programs the
// oracles build (tens of rows and columns); no sparsity, no presolve.

#include <vector>

namespace upkeep {

/// maximize objective . x  subject to  le_rows x <= le_rhs,  eq_rows x = eq_rhs,  x >= 0.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<std::vector<double>> le_rows;
  std::vector<double> le_rhs;
  std::vector<std::vector<double>> eq_rows;
  std::vector<double> eq_rhs;

  void add_le(std::vector<double> row, double rhs) {
    le_rows.push_back(std::move(row));
    le_rhs.push_back(rhs);
  }
  void add_eq(std::vector<double> row, double rhs) {
    eq_rows.push_back(std::move(row));
    eq_rhs.push_back(rhs);
  }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  std::vector<double> x;
  int pivots = 0;
};

LpResult solve_lp(const LinearProgram& lp, double tol = 1e-9);

}  // namespace upkeep
