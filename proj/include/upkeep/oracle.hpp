#pragma once

// Brute-force optimality checks for the three solvers: an uptime grid with
// greedy contribution fill, an uptime grid with an exact LP per point, and an
// exhaustive grid over bounded-payment menus.

#include <cstddef>
#include <vector>

#include "upkeep/kernels.hpp"
#include "upkeep/model.hpp"
#include "upkeep/screening.hpp"

namespace upkeep {

struct GridSpec {
  int q_points = 2001;
  int refine_rounds = 3;
  double lp_tol = 1e-9;

  void validate() const;
};

enum class PrimalMode { first_best, participation };

struct GridResult {
  double W = 0.0;
  double Q = 0.0;
  std::vector<double> P;  ///< per type, distribution order
};

/// Best welfare over R = Q for all types, filling rho Q in ascending cost order.
GridResult primal_grid_welfare(const TypeDistribution& d, double rho, PrimalMode mode,
                               const GridSpec& g = {}, Exec exec = Exec::parallel);

/// Welfare of the greedy fill at one uptime; -inf when rho Q cannot be covered.
double greedy_fill_welfare(double Q, const TypeDistribution& d, double rho, PrimalMode mode,
                           std::vector<double>* P = nullptr);

class TooManyTypesError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

inline constexpr std::size_t kLpOracleMaxTypes = 8;

struct LpGridResult {
  double W = 0.0;
  double Q = 0.0;
  Mechanism mechanism;
};

/// Screening welfare at one uptime via the full linear program over (R, P);
/// -inf when infeasible.
double lp_screening_at(double Q, const TypeDistribution& d, double rho, double lp_tol,
                       Mechanism* out = nullptr);

LpGridResult lp_screening_welfare(const TypeDistribution& d, double rho, const GridSpec& g = {},
                                  Exec exec = Exec::parallel);

/// Exhaustive search over posted prices and two-step menus (r0, nu0, nu1) on a
/// grid of the given resolution. Every candidate is a feasible menu, so the
/// result never exceeds the exact optimum.
double menu_grid_oracle(const std::vector<MonopolyBuyer>& vals, double cap, double resolution,
                        Exec exec = Exec::parallel);

}  // namespace upkeep
