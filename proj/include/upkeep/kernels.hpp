#pragma once

// Grid evaluation with a serial reference path and an OpenMP path. Both fill
// the same value array; reductions run serially afterwards, so the result
// never depends on the schedule.

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <vector>

#include <omp.h>

namespace upkeep {

enum class Exec { serial, parallel };

/// Worker cap: UPKEEP_THREADS when set to a positive integer, else the OpenMP default.
inline int worker_threads() {
  if (const char* env = std::getenv("UPKEEP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  return omp_get_max_threads();
}

template <class F>
std::vector<double> evaluate_grid(std::size_t count, F&& f, Exec exec) {
  std::vector<double> out(count);
  if (exec == Exec::serial) {
    for (std::size_t k = 0; k < count; ++k) out[k] = f(k);
  } else {
    const long n = static_cast<long>(count);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (long k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = f(static_cast<std::size_t>(k));
  }
  return out;
}

/// Index of the largest finite value, lowest index on ties; count when none.
inline std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = v.size();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k])) continue;
    if (best == v.size() || v[k] > v[best]) best = k;
  }
  return best;
}

/// Maps f over [0, count) into a vector of results; order is index order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& f, Exec exec) {
  std::vector<T> out(count);
  if (exec == Exec::serial) {
    for (std::size_t k = 0; k < count; ++k) out[k] = f(k);
  } else {
    const long n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic) num_threads(worker_threads())
    for (long k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = f(static_cast<std::size_t>(k));
  }
  return out;
}

}  // namespace upkeep
