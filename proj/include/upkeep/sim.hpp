#pragma once

// Steady-state simulators for the two microfoundations of the reduced form.
//
// Poisson: type-theta agents arrive at rate mass(theta). While the machine
// works an arrival uses it with probability sigma_W; while it is broken an
// arrival contributes with probability sigma_B and the first contribution
// fixes it.
//
// Fluid: long-lived agents are aggregated per type. A broken spell lasts a
// contribution quantum divided by the aggregate rate sum mass * sigma_B.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "upkeep/kernels.hpp"
#include "upkeep/model.hpp"

namespace upkeep {

enum class DistKind { exponential, deterministic };

struct PhysicalParams {
  double rho = 1.0;
  DistKind lifespan = DistKind::exponential;  ///< mean 1 / rho
  DistKind quantum = DistKind::exponential;   ///< mean 1, fluid only

  void validate() const;
};

struct MarkovPolicy {
  std::vector<double> sigma_W;  ///< usage probability while working
  std::vector<double> sigma_B;  ///< contribution probability while broken
};

/// sigma_W = R / Q (0 when Q = 0), sigma_B = P / (1 - Q) (0 when Q = 1).
MarkovPolicy build_policy(const Mechanism& m);

struct Estimate {
  double value = 0.0;
  double ci = 0.0;  ///< 95% normal-approximation radius from batch means
};

enum class SimKind { poisson, fluid };

const char* to_string(SimKind k);

struct SimStats {
  SimKind kind = SimKind::poisson;
  double rho = 0.0;
  std::vector<double> mass;
  double horizon = 0.0;  ///< measured time, warm-up excluded

  Estimate Q_hat;
  std::vector<Estimate> R_hat;
  std::vector<Estimate> P_hat;
  long n_breaks = 0;
  Estimate break_rate;  ///< n_breaks / horizon
  Estimate lifespan_mean;
  long n_lifespans = 0;

  bool usage_only_working = true;
  bool contribution_only_broken = true;
  bool lifespan_mean_ok = true;

  bool admissible() const { return usage_only_working && contribution_only_broken && lifespan_mean_ok; }
};

struct SimOptions {
  double horizon = 1e5;
  std::optional<std::uint64_t> seed;
  std::uint64_t stream = 0;
  int batches = 50;
  double warmup_lifespans = 10.0;
  std::ostream* trace = nullptr;  ///< optional event dump
};

SimStats simulate_poisson(const MarkovPolicy& pol, const TypeDistribution& d,
                          const PhysicalParams& phys, const SimOptions& opt);
SimStats simulate_fluid(const MarkovPolicy& pol, const TypeDistribution& d,
                        const PhysicalParams& phys, const SimOptions& opt);
SimStats simulate(SimKind kind, const MarkovPolicy& pol, const TypeDistribution& d,
                  const PhysicalParams& phys, const SimOptions& opt);

/// Independent replications on disjoint streams of one seed.
std::vector<SimStats> replicate(SimKind kind, const MarkovPolicy& pol, const TypeDistribution& d,
                                const PhysicalParams& phys, const SimOptions& opt, int count,
                                Exec exec = Exec::parallel);

struct ReducedFormCheck {
  bool pass = false;
  bool estimates_ok = false;
  bool admissible = false;
  bool balance_ok = false;
  bool break_rate_ok = false;
  std::vector<std::string> failures;
};

/// Every estimate within sigma_mult * ci of the target (types with zero mass
/// are skipped), admissibility flags set, and rho Q_hat, sum mass * P_hat and
/// the empirical break rate mutually consistent within their combined radii.
ReducedFormCheck check_reduced_form(const SimStats& stats, const Mechanism& target,
                                    double sigma_mult);

struct TraceCheck {
  bool header_ok = false;
  bool usage_only_working = true;
  bool contribution_only_broken = true;
  bool states_consistent = true;
  long events = 0;

  bool ok() const { return header_ok && usage_only_working && contribution_only_broken && states_consistent; }
};

/// Re-reads an event dump and checks the admissibility rules line by line.
TraceCheck check_trace(std::istream& in);

}  // namespace upkeep
