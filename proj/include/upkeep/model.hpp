#pragma once

// Domain types for the collective-upkeep model: agent types, type
// distributions, reduced-form mechanisms (R, P, Q), and constraint checks.

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace upkeep {

inline constexpr double kDefaultTol = 1e-9;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Rejected input data (bad field, duplicate id, empty distribution).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A solver was handed a distribution it cannot work with.
class DegenerateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AgentType {
  std::string id;
  double u = 1.0;     ///< usage benefit flow, > 0
  double c = 1.0;     ///< contribution cost flow, > 0
  double mass = 1.0;  ///< weight under the type measure, >= 0

  /// Rate of substitution between access and contributions, u / c.
  double nu() const { return u / c; }
};

/// Discrete weighted type measure. Masses need not sum to one.
class TypeDistribution {
public:
  TypeDistribution() = default;
  /// Validates every type; throws ValidationError on the first violation.
  explicit TypeDistribution(std::vector<AgentType> types);

  std::span<const AgentType> types() const { return types_; }
  const AgentType& operator[](std::size_t i) const { return types_[i]; }
  std::size_t size() const { return types_.size(); }

  double total_mass() const { return total_mass_; }
  /// Aggregate usage benefit, sum of mass * u.
  double u_bar() const { return u_bar_; }
  /// Aggregate contribution cost, sum of mass * c.
  double c_bar() const { return c_bar_; }
  double max_cost() const { return max_cost_; }
  /// Sum of mass * nu.
  double nu_mass() const { return nu_mass_; }

  /// Index of the type with the given id, or size() when absent.
  std::size_t index_of(const std::string& id) const;

private:
  std::vector<AgentType> types_;
  double total_mass_ = 0.0;
  double u_bar_ = 0.0;
  double c_bar_ = 0.0;
  double max_cost_ = 0.0;
  double nu_mass_ = 0.0;
};

/// Reduced form (R, P, Q). R and P are indexed in distribution order.
struct Mechanism {
  double Q = 0.0;
  std::vector<double> R;
  std::vector<double> P;

  static Mechanism zero(std::size_t n) {
    return Mechanism{0.0, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  }
};

enum class Family : unsigned { balance = 1u, simplex = 2u, participation = 4u, ic = 8u };

constexpr unsigned operator|(Family a, Family b) {
  return static_cast<unsigned>(a) | static_cast<unsigned>(b);
}
constexpr unsigned operator|(unsigned a, Family b) { return a | static_cast<unsigned>(b); }
inline constexpr unsigned kAllFamilies =
    Family::balance | Family::simplex | Family::participation | Family::ic;

/// Residuals are signed slacks: a constraint holds when its residual is >= -tol
/// (balance: |residual| <= tol).
struct FeasibilityReport {
  unsigned families = 0;
  double tol = kDefaultTol;

  double balance = 0.0;
  std::vector<double> simplex_usage;         ///< Q - R(theta)
  std::vector<double> simplex_contribution;  ///< 1 - Q - P(theta)
  std::vector<double> simplex_lower;         ///< min(R, P, Q, 1 - Q) lower-bound slack
  std::vector<double> participation;         ///< agent utility
  std::vector<double> ic_worst;              ///< min over theta' of the IC slack

  bool balance_ok = true;
  bool simplex_ok = true;
  bool participation_ok = true;
  bool ic_ok = true;

  bool ok() const { return balance_ok && simplex_ok && participation_ok && ic_ok; }
};

/// r * u - p * c.
double agent_utility(const AgentType& t, double r, double p);
double valuation(const AgentType& t);
/// Sum over types of mass * (R u - P c).
double welfare(const Mechanism& m, const TypeDistribution& d);
/// rho * Q - sum of mass * P.
double balance_residual(const Mechanism& m, const TypeDistribution& d, double rho);

FeasibilityReport check_feasible(const Mechanism& m, const TypeDistribution& d, double rho,
                                 unsigned families, double tol = kDefaultTol);

}  // namespace upkeep
