#pragma once

// Incentive-compatible (screening) mechanisms.
//
// For fixed uptime Q the designer's Lagrangian reduces to a single-good sale
// with valuations nu_hat = nu Q / (1 - Q), allocation r = R / Q, payment
// p = P / (1 - Q) and a payment cap p <= 1. The optimal screening mechanism
// offers at most two nonzero tiers: a full tier (Q, 1 - Q) and a partial tier.

#include <cstddef>
#include <string>
#include <vector>

#include "upkeep/model.hpp"

namespace upkeep {

struct MonopolyBuyer {
  double nu_hat = 0.0;          ///< normalized valuation, >= 0
  double surplus_weight = 0.0;  ///< weight on r nu_hat - p
  double payment_weight = 0.0;  ///< weight on p; may be negative
};

struct MonopolyResult {
  std::vector<double> r;  ///< allocation per buyer, input order
  std::vector<double> p;  ///< payment per buyer, input order
  double value = 0.0;
};

/// Exact optimum of sum w_s (r nu_hat - p) + sum w_p p over IC, IR menus with
/// 0 <= p <= 1. Candidates are posted prices and two-step menus whose jump
/// points are buyer valuations. Buyers with equal valuations are pooled on one
/// bundle, which is optimal when their payment weights are nonnegative (as in
/// the screening Lagrangian); ties prefer more allocation.
MonopolyResult bounded_monopoly_solve(const std::vector<MonopolyBuyer>& buyers);

struct IcLagrangian {
  double value = 0.0;
  Mechanism mechanism;  ///< denormalized inner menu at this Q
};

/// Reduced screening Lagrangian at (Q, y). Q in {0, 1} is handled in closed form.
IcLagrangian ic_lagrangian(double Q, double y, const TypeDistribution& d, double rho);

struct MenuTier {
  double r = 0.0;  ///< R / Q
  double p = 0.0;  ///< P / (1 - Q)
};

inline constexpr int kOut = -1;

struct ScreeningSolution {
  double rho = 0.0;
  double y_star = 0.0;  ///< kInf when no IC mechanism has slack balance
  double Q_star = 0.0;
  double W_star = 0.0;
  Mechanism mechanism;
  std::vector<double> nu;        ///< valuation per type, distribution order
  std::vector<MenuTier> tiers;   ///< nonzero tiers, highest access first
  std::vector<int> assignment;   ///< tier index per type, or kOut

  // diagnostics
  double W_dual = 0.0;         ///< max_Q of the IC Lagrangian at y*
  double max_slack = 0.0;      ///< max over IC mechanisms of sum mass P - rho Q
  int iterations = 0;

  bool y_finite() const { return y_star < kInf; }
};

ScreeningSolution solve_screening(const TypeDistribution& d, double rho,
                                  double tol = kDefaultTol);

/// Checks the two-tier shape: monotone assignment in nu, at most two nonzero
/// bundles, top tier pays 1 - Q when two tiers exist, a lone tier has R = Q.
bool verify_structure(const ScreeningSolution& sol, double tol = 1e-8);

}  // namespace upkeep
