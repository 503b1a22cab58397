#pragma once

// First-best mechanism: welfare maximum under the physical constraints only.
// Contributions follow a cost threshold y_fb; every type gets full access.

#include "upkeep/model.hpp"

namespace upkeep {

struct FirstBestSolution {
  double y_fb = 0.0;
  double Q_fb = 0.0;
  double W_fb = 0.0;
  Mechanism mechanism;
  /// Contribution fraction of (1 - Q) assigned to types whose cost sits exactly
  /// at the threshold. Zero when no cost atom is at y_fb.
  double marginal_fraction = 0.0;
  int iterations = 0;
};

/// (u_bar - rho y) - sum of mass * (y - c)^+. Strictly decreasing in y.
double fb_threshold_gap(double y, const TypeDistribution& d, double rho);

/// max(u_bar - rho y, sum of mass * (y - c)^+); convex, minimized at y_fb.
double fb_dual_value(double y, const TypeDistribution& d, double rho);

FirstBestSolution solve_first_best(const TypeDistribution& d, double rho,
                                   double tol = kDefaultTol);

}  // namespace upkeep
