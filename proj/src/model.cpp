#include "upkeep/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace upkeep {

TypeDistribution::TypeDistribution(std::vector<AgentType> types) : types_(std::move(types)) {
  if (types_.empty()) throw ValidationError("type distribution has no types");
  std::set<std::string> seen;
  for (const auto& t : types_) {
    if (!seen.insert(t.id).second) throw ValidationError("duplicate type id '" + t.id + "'");
    if (!(t.u > 0.0) || !std::isfinite(t.u))
      throw ValidationError("type '" + t.id + "': u must be positive and finite");
    if (!(t.c > 0.0) || !std::isfinite(t.c))
      throw ValidationError("type '" + t.id + "': c must be positive and finite");
    if (!(t.mass >= 0.0) || !std::isfinite(t.mass))
      throw ValidationError("type '" + t.id + "': mass must be nonnegative and finite");
    total_mass_ += t.mass;
    u_bar_ += t.mass * t.u;
    c_bar_ += t.mass * t.c;
    nu_mass_ += t.mass * t.nu();
    max_cost_ = std::max(max_cost_, t.c);
  }
  if (!(total_mass_ > 0.0)) throw ValidationError("type distribution has zero total mass");
}

std::size_t TypeDistribution::index_of(const std::string& id) const {
  auto it = std::find_if(types_.begin(), types_.end(),
                         [&](const AgentType& t) { return t.id == id; });
  return static_cast<std::size_t>(it - types_.begin());
}

double agent_utility(const AgentType& t, double r, double p) { return r * t.u - p * t.c; }

double valuation(const AgentType& t) { return t.nu(); }

double welfare(const Mechanism& m, const TypeDistribution& d) {
  double w = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    w += d[i].mass * agent_utility(d[i], m.R[i], m.P[i]);
  return w;
}

double balance_residual(const Mechanism& m, const TypeDistribution& d, double rho) {
  double contributed = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) contributed += d[i].mass * m.P[i];
  return rho * m.Q - contributed;
}

FeasibilityReport check_feasible(const Mechanism& m, const TypeDistribution& d, double rho,
                                 unsigned families, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("check_feasible: tol must be positive");
  if (m.R.size() != d.size() || m.P.size() != d.size())
    throw std::invalid_argument("check_feasible: mechanism does not match distribution size");

  FeasibilityReport rep;
  rep.families = families;
  rep.tol = tol;
  const std::size_t n = d.size();

  if (families & static_cast<unsigned>(Family::balance)) {
    rep.balance = balance_residual(m, d, rho);
    rep.balance_ok = std::abs(rep.balance) <= tol;
  }
  if (families & static_cast<unsigned>(Family::simplex)) {
    rep.simplex_usage.resize(n);
    rep.simplex_contribution.resize(n);
    rep.simplex_lower.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rep.simplex_usage[i] = m.Q - m.R[i];
      rep.simplex_contribution[i] = 1.0 - m.Q - m.P[i];
      rep.simplex_lower[i] = std::min({m.R[i], m.P[i], m.Q, 1.0 - m.Q});
      if (rep.simplex_usage[i] < -tol || rep.simplex_contribution[i] < -tol ||
          rep.simplex_lower[i] < -tol)
        rep.simplex_ok = false;
    }
  }
  if (families & static_cast<unsigned>(Family::participation)) {
    rep.participation.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rep.participation[i] = agent_utility(d[i], m.R[i], m.P[i]);
      if (rep.participation[i] < -tol) rep.participation_ok = false;
    }
  }
  if (families & static_cast<unsigned>(Family::ic)) {
    rep.ic_worst.assign(n, kInf);
    for (std::size_t i = 0; i < n; ++i) {
      const double own = agent_utility(d[i], m.R[i], m.P[i]);
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        rep.ic_worst[i] = std::min(rep.ic_worst[i], own - agent_utility(d[i], m.R[j], m.P[j]));
      }
      if (rep.ic_worst[i] < -tol) rep.ic_ok = false;
    }
  }
  return rep;
}

}  // namespace upkeep
