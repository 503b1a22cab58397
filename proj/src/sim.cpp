#include "upkeep/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "upkeep/rng.hpp"

namespace upkeep {

void PhysicalParams::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw std::invalid_argument("breakage rate rho must be positive and finite");
}

MarkovPolicy build_policy(const Mechanism& m) {
  MarkovPolicy pol;
  const std::size_t n = m.R.size();
  pol.sigma_W.assign(n, 0.0);
  pol.sigma_B.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (m.Q > 0.0) pol.sigma_W[i] = std::clamp(m.R[i] / m.Q, 0.0, 1.0);
    if (m.Q < 1.0) pol.sigma_B[i] = std::clamp(m.P[i] / (1.0 - m.Q), 0.0, 1.0);
  }
  return pol;
}

const char* to_string(SimKind k) { return k == SimKind::poisson ? "poisson" : "fluid"; }

namespace {

constexpr double kZ95 = 1.96;

/// Per-batch accumulators over the measurement window [t0, t0 + horizon).
class BatchClock {
public:
  BatchClock(double t0, double horizon, int batches)
      : t0_(t0), t1_(t0 + horizon), width_(horizon / batches), batches_(batches) {}

  std::vector<double> make() const { return std::vector<double>(static_cast<std::size_t>(batches_), 0.0); }
  double start() const { return t0_; }
  double end() const { return t1_; }
  double width() const { return width_; }
  bool inside(double t) const { return t >= t0_ && t < t1_; }

  void add_interval(std::vector<double>& acc, double a, double b, double weight) const {
    a = std::max(a, t0_);
    b = std::min(b, t1_);
    if (!(b > a) || weight == 0.0) return;
    auto k = static_cast<int>((a - t0_) / width_);
    while (a < b && k < batches_) {
      const double edge = k + 1 == batches_ ? t1_ : t0_ + width_ * (k + 1);
      const double stop = std::min(b, edge);
      acc[static_cast<std::size_t>(k)] += weight * (stop - a);
      a = stop;
      ++k;
    }
  }

  void add_count(std::vector<double>& acc, double t, double amount) const {
    if (!inside(t)) return;
    const auto k = std::min(static_cast<int>((t - t0_) / width_), batches_ - 1);
    acc[static_cast<std::size_t>(k)] += amount;
  }

  /// Mean over the window and batch-means radius of acc / (width * scale).
  Estimate estimate(const std::vector<double>& acc, double scale) const {
    Estimate e;
    const double b = static_cast<double>(acc.size());
    double sum = 0.0;
    for (double v : acc) sum += v / (width_ * scale);
    e.value = sum / b;
    double ss = 0.0;
    for (double v : acc) {
      const double dv = v / (width_ * scale) - e.value;
      ss += dv * dv;
    }
    e.ci = acc.size() > 1 ? kZ95 * std::sqrt(ss / (b - 1.0)) / std::sqrt(b) : 0.0;
    return e;
  }

private:
  double t0_, t1_, width_;
  int batches_;
};

struct Recorder {
  std::ostream* out = nullptr;
  const TypeDistribution* d = nullptr;

  void operator()(double t, const char* kind, long type, bool working) const {
    if (!out) return;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", t);
    *out << buf << '\t' << kind << '\t' << (type < 0 ? std::string("-") : (*d)[static_cast<std::size_t>(type)].id)
         << '\t' << (working ? "WORKING" : "BROKEN") << '\n';
  }
};

void check_inputs(const MarkovPolicy& pol, const TypeDistribution& d, const PhysicalParams& phys,
                  const SimOptions& opt) {
  phys.validate();
  if (!opt.seed) throw std::invalid_argument("simulation requires an explicit seed");
  if (!(opt.horizon > 0.0) || !std::isfinite(opt.horizon))
    throw std::invalid_argument("simulation horizon must be positive and finite");
  if (opt.batches < 2) throw std::invalid_argument("simulation needs at least two batches");
  if (pol.sigma_W.size() != d.size() || pol.sigma_B.size() != d.size())
    throw std::invalid_argument("policy size does not match the type distribution");
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(pol.sigma_W[i] >= 0.0 && pol.sigma_W[i] <= 1.0 && pol.sigma_B[i] >= 0.0 &&
          pol.sigma_B[i] <= 1.0))
      throw std::invalid_argument("policy probabilities must lie in [0, 1]");
}

double draw(Xoshiro256& rng, DistKind kind, double mean) {
  return kind == DistKind::exponential ? rng.exponential(mean) : mean;
}

void finish_lifespans(SimStats& s, const std::vector<double>& lives, double rho) {
  s.n_lifespans = static_cast<long>(lives.size());
  if (lives.empty()) return;
  double sum = 0.0;
  for (double v : lives) sum += v;
  const double n = static_cast<double>(lives.size());
  s.lifespan_mean.value = sum / n;
  if (lives.size() > 1) {
    double ss = 0.0;
    for (double v : lives) ss += (v - s.lifespan_mean.value) * (v - s.lifespan_mean.value);
    s.lifespan_mean.ci = kZ95 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    s.lifespan_mean_ok =
        std::abs(s.lifespan_mean.value - 1.0 / rho) <= 4.0 * s.lifespan_mean.ci + 1e-9 / rho;
  }
}

SimStats prepare(SimKind kind, const TypeDistribution& d, const PhysicalParams& phys,
                 const SimOptions& opt) {
  SimStats s;
  s.kind = kind;
  s.rho = phys.rho;
  s.horizon = opt.horizon;
  s.mass.reserve(d.size());
  for (const auto& t : d.types()) s.mass.push_back(t.mass);
  return s;
}

}  // namespace

SimStats simulate_poisson(const MarkovPolicy& pol, const TypeDistribution& d,
                          const PhysicalParams& phys, const SimOptions& opt) {
  check_inputs(pol, d, phys, opt);
  auto rng = Xoshiro256::stream(*opt.seed, opt.stream);
  const std::size_t n = d.size();
  const double life = 1.0 / phys.rho;
  const BatchClock clock(opt.warmup_lifespans * life, opt.horizon, opt.batches);
  const Recorder rec{opt.trace, &d};
  if (opt.trace) *opt.trace << "# upkeep-trace v1\n";

  SimStats s = prepare(SimKind::poisson, d, phys, opt);
  const double arrival_rate = d.total_mass();

  auto up = clock.make();
  auto breaks = clock.make();
  std::vector<std::vector<double>> uses(n, clock.make()), contribs(n, clock.make());
  std::vector<double> lives;

  // Cumulative masses for drawing the type of an arrival.
  std::vector<double> cum(n);
  for (std::size_t i = 0; i < n; ++i) cum[i] = d[i].mass;
  std::partial_sum(cum.begin(), cum.end(), cum.begin());
  auto draw_type = [&] {
    const double x = rng.uniform() * arrival_rate;
    const auto it = std::upper_bound(cum.begin(), cum.end(), x);
    std::size_t i = static_cast<std::size_t>(it - cum.begin());
    if (i >= n) i = n - 1;
    while (d[i].mass <= 0.0 && i > 0) --i;
    return i;
  };

  double t = 0.0;
  bool working = true;
  double life_start = 0.0;
  double next_break = draw(rng, phys.lifespan, life);
  const double end = clock.end();

  while (t < end) {
    const double next_arrival = arrival_rate > 0.0 ? t + rng.exponential(1.0 / arrival_rate) : kInf;
    if (working) {
      if (next_break <= next_arrival) {
        clock.add_interval(up, t, next_break, 1.0);
        if (life_start >= clock.start() && next_break < end) lives.push_back(next_break - life_start);
        t = next_break;
        working = false;
        clock.add_count(breaks, t, 1.0);
        if (clock.inside(t)) ++s.n_breaks;
        rec(t, "BREAK", -1, working);
        continue;
      }
      clock.add_interval(up, t, next_arrival, 1.0);
      t = next_arrival;
      if (t >= end) break;
      const std::size_t i = draw_type();
      rec(t, "ARRIVAL", static_cast<long>(i), working);
      if (rng.bernoulli(pol.sigma_W[i])) {
        if (!working) s.usage_only_working = false;
        clock.add_count(uses[i], t, 1.0);
        rec(t, "USE", static_cast<long>(i), working);
      }
    } else {
      if (!std::isfinite(next_arrival)) break;
      t = next_arrival;
      if (t >= end) break;
      const std::size_t i = draw_type();
      rec(t, "ARRIVAL", static_cast<long>(i), working);
      if (rng.bernoulli(pol.sigma_B[i])) {
        if (working) s.contribution_only_broken = false;
        clock.add_count(contribs[i], t, 1.0);
        rec(t, "CONTRIBUTE", static_cast<long>(i), working);
        working = true;
        life_start = t;
        next_break = t + draw(rng, phys.lifespan, life);
        rec(t, "FIX", -1, working);
      }
    }
  }

  s.Q_hat = clock.estimate(up, 1.0);
  s.break_rate = clock.estimate(breaks, 1.0);
  s.R_hat.resize(n);
  s.P_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i].mass <= 0.0) continue;
    s.R_hat[i] = clock.estimate(uses[i], d[i].mass);
    s.P_hat[i] = clock.estimate(contribs[i], d[i].mass);
  }
  finish_lifespans(s, lives, phys.rho);
  return s;
}

SimStats simulate_fluid(const MarkovPolicy& pol, const TypeDistribution& d,
                        const PhysicalParams& phys, const SimOptions& opt) {
  check_inputs(pol, d, phys, opt);
  auto rng = Xoshiro256::stream(*opt.seed, opt.stream);
  const std::size_t n = d.size();
  const double life = 1.0 / phys.rho;
  const BatchClock clock(opt.warmup_lifespans * life, opt.horizon, opt.batches);
  const Recorder rec{opt.trace, &d};
  if (opt.trace) *opt.trace << "# upkeep-trace v1\n";

  SimStats s = prepare(SimKind::fluid, d, phys, opt);
  double fix_rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) fix_rate += d[i].mass * pol.sigma_B[i];

  auto up = clock.make();
  auto breaks = clock.make();
  std::vector<std::vector<double>> uses(n, clock.make()), contribs(n, clock.make());
  std::vector<double> lives;
  const double end = clock.end();

  double t = 0.0;
  while (t < end) {
    // Working spell; usage accrues at sigma_W per unit of working time.
    const double L = draw(rng, phys.lifespan, life);
    for (std::size_t i = 0; i < n; ++i) {
      if (pol.sigma_W[i] > 0.0) {
        rec(t, "USE", static_cast<long>(i), true);
        clock.add_interval(uses[i], t, t + L, pol.sigma_W[i]);
      }
    }
    clock.add_interval(up, t, t + L, 1.0);
    if (t >= clock.start() && t + L < end) lives.push_back(L);
    t += L;
    if (t >= end) break;
    clock.add_count(breaks, t, 1.0);
    if (clock.inside(t)) ++s.n_breaks;
    rec(t, "BREAK", -1, false);

    // Broken spell: the quantum is worked off at the aggregate contribution rate.
    const double D = fix_rate > 0.0 ? draw(rng, phys.quantum, 1.0) / fix_rate : kInf;
    const double stop = std::min(t + D, end);
    for (std::size_t i = 0; i < n; ++i) {
      if (pol.sigma_B[i] > 0.0) {
        rec(t, "CONTRIBUTE", static_cast<long>(i), false);
        clock.add_interval(contribs[i], t, stop, pol.sigma_B[i]);
      }
    }
    t += D;
    if (t >= end) break;
    rec(t, "FIX", -1, true);
  }

  s.Q_hat = clock.estimate(up, 1.0);
  s.break_rate = clock.estimate(breaks, 1.0);
  s.R_hat.resize(n);
  s.P_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.R_hat[i] = clock.estimate(uses[i], 1.0);
    s.P_hat[i] = clock.estimate(contribs[i], 1.0);
  }
  finish_lifespans(s, lives, phys.rho);
  return s;
}

SimStats simulate(SimKind kind, const MarkovPolicy& pol, const TypeDistribution& d,
                  const PhysicalParams& phys, const SimOptions& opt) {
  return kind == SimKind::poisson ? simulate_poisson(pol, d, phys, opt)
                                  : simulate_fluid(pol, d, phys, opt);
}

std::vector<SimStats> replicate(SimKind kind, const MarkovPolicy& pol, const TypeDistribution& d,
                                const PhysicalParams& phys, const SimOptions& opt, int count,
                                Exec exec) {
  if (count < 1) throw std::invalid_argument("replicate: count must be positive");
  if (!opt.seed) throw std::invalid_argument("simulation requires an explicit seed");
  return parallel_map<SimStats>(
      static_cast<std::size_t>(count),
      [&](std::size_t k) {
        SimOptions o = opt;
        o.stream = opt.stream + k;
        o.trace = nullptr;
        return simulate(kind, pol, d, phys, o);
      },
      exec);
}

ReducedFormCheck check_reduced_form(const SimStats& stats, const Mechanism& target,
                                    double sigma_mult) {
  if (!(sigma_mult >= 1.0)) throw std::invalid_argument("check_reduced_form: sigma_mult must be >= 1");
  const std::size_t n = stats.mass.size();
  if (target.R.size() != n || target.P.size() != n || stats.R_hat.size() != n)
    throw std::invalid_argument("check_reduced_form: size mismatch");
  constexpr double eps = 1e-9;
  ReducedFormCheck out;
  auto close = [&](const Estimate& e, double want, const std::string& what) {
    const bool ok = std::abs(e.value - want) <= sigma_mult * e.ci + eps;
    if (!ok) out.failures.push_back(what);
    return ok;
  };

  out.estimates_ok = close(stats.Q_hat, target.Q, "Q");
  for (std::size_t i = 0; i < n; ++i) {
    if (stats.mass[i] <= 0.0) continue;
    out.estimates_ok &= close(stats.R_hat[i], target.R[i], "R[" + std::to_string(i) + "]");
    out.estimates_ok &= close(stats.P_hat[i], target.P[i], "P[" + std::to_string(i) + "]");
  }

  out.admissible = stats.admissible();
  if (!out.admissible) out.failures.push_back("admissibility");

  double contrib = 0.0, contrib_ci = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    contrib += stats.mass[i] * stats.P_hat[i].value;
    contrib_ci += stats.mass[i] * stats.P_hat[i].ci;
  }
  const double breaks = stats.rho * stats.Q_hat.value;
  const double breaks_ci = stats.rho * stats.Q_hat.ci;
  out.balance_ok = std::abs(breaks - contrib) <= sigma_mult * (breaks_ci + contrib_ci) + eps;
  if (!out.balance_ok) out.failures.push_back("balance");

  const auto& br = stats.break_rate;
  out.break_rate_ok = std::abs(br.value - breaks) <= sigma_mult * (br.ci + breaks_ci) + eps &&
                      std::abs(br.value - contrib) <= sigma_mult * (br.ci + contrib_ci) + eps;
  if (!out.break_rate_ok) out.failures.push_back("break_rate");

  out.pass = out.estimates_ok && out.admissible && out.balance_ok && out.break_rate_ok;
  return out;
}

TraceCheck check_trace(std::istream& in) {
  TraceCheck tc;
  std::string line;
  if (!std::getline(in, line)) return tc;
  tc.header_ok = line == "# upkeep-trace v1";
  bool working = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string time, kind, id, state;
    if (!std::getline(ss, time, '\t') || !std::getline(ss, kind, '\t') ||
        !std::getline(ss, id, '\t') || !std::getline(ss, state)) {
      tc.states_consistent = false;
      continue;
    }
    ++tc.events;
    const bool after = state == "WORKING";
    if (kind == "USE") {
      if (!working || !after) tc.usage_only_working = false;
    } else if (kind == "CONTRIBUTE") {
      if (working || after) tc.contribution_only_broken = false;
    } else if (kind == "BREAK") {
      if (!working || after) tc.states_consistent = false;
    } else if (kind == "FIX") {
      if (working || !after) tc.states_consistent = false;
    } else if (kind == "ARRIVAL") {
      if (after != working) tc.states_consistent = false;
    } else {
      tc.states_consistent = false;
    }
    working = after;
  }
  return tc;
}

}  // namespace upkeep
