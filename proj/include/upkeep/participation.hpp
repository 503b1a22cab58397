#pragma once

// Participation-constrained mechanism. Types are observed; every type must
// weakly prefer the mechanism to its outside option. The optimum is the
// smallest saddle point (Q*, y*) of the reduced Lagrangian
//
//   l(Q; y) = Q (u_bar - rho y) + sum mass * min(1 - Q, Q nu) (y - c)^+
//
// which is concave and piecewise linear in Q (kinks at Q = 1 / (1 + nu)) and
// convex piecewise linear in y. y* = inf when the dual minimum is not attained.

#include <cstddef>
#include <string>
#include <vector>

#include "upkeep/model.hpp"

namespace upkeep {

enum class ContributionClass { full, bound, none };

const char* to_string(ContributionClass c);

struct ParticipationSolution {
  double rho = 0.0;
  double y_star = 0.0;  ///< kInf when the dual minimum is not attained
  double Q_star = 0.0;
  double W_star = 0.0;
  Mechanism mechanism;
  std::vector<ContributionClass> classes;
  /// Fraction of min(1 - Q, Q nu) contributed by types with c == y*.
  double marginal_fraction = 0.0;

  // diagnostics
  double dual_value = 0.0;   ///< max_Q l(Q; y*)
  double slater = 0.0;       ///< slater_gap at the solve
  int iterations = 0;
  bool exact_recovery = true;  ///< false when the fallback rationing path was used

  bool y_finite() const { return y_star < kInf; }
};

struct InnerMax {
  double Q = 0.0;
  double value = 0.0;
};

double reduced_lagrangian(double Q, double y, const TypeDistribution& d, double rho);

/// Exact maximizer of Q -> l(Q; y) over the kink partition; smallest maximizer.
InnerMax inner_max_Q(double y, const TypeDistribution& d, double rho, double tol = kDefaultTol);

/// max over Q of sum mass * min(1 - Q, Q nu) - rho Q. Positive iff a strictly
/// slack participation-feasible mechanism exists.
double slater_gap(const TypeDistribution& d, double rho, double tol = kDefaultTol);

ParticipationSolution solve_participation(const TypeDistribution& d, double rho,
                                          double tol = kDefaultTol);

/// Thrown by classify_interval when types are not ordered.
class NotOrderedError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

struct IntervalReport {
  /// Type indices sorted by cost descending (theta = -c ascending).
  std::vector<std::size_t> order;
  /// Types with active participation (zero utility), as positions in `order`.
  /// Equals the BOUND class when Q* > 0 and every type when Q* = 0.
  std::vector<std::size_t> bound;
  bool contiguous = true;
  double y_fb = 0.0;
  double W_fb = 0.0;
  double span_lo = 0.0;  ///< smallest active cost
  double span_hi = 0.0;  ///< largest active cost
  /// y_fb lies in [span_lo, span_hi].
  bool contains_y_fb = false;
  /// y_fb lies in the cost interval the active set occupies on the real line:
  /// from the largest inactive cost below span_lo up to y*.
  bool contains_y_fb_extended = false;
  bool fb_attained = false;
  bool passes = false;
};

IntervalReport classify_interval(const ParticipationSolution& sol, const TypeDistribution& d,
                                 double tol = kDefaultTol);

}  // namespace upkeep
