#pragma once

#include <cmath>

#include "earlystop/errors.hpp"

namespace earlystop {

template <class F>
CriticalRadius bisect_crossing(F&& g, double lo, double hi, const RootOptions& options) {
  int doublings = 0;
  while (!(g(hi) > 0.0)) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 2000 || !std::isfinite(hi)) {
      throw NumericalError("could not bracket the crossing", doublings);
    }
  }
  int it = 0;
  double g_hi = g(hi);
  while (it < options.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket exhausted at double resolution
    const double g_mid = g(mid);
    ++it;
    if (g_mid > 0.0) {
      hi = mid;
      g_hi = g_mid;
    } else {
      lo = mid;
    }
    if (std::abs(g_hi) <= options.tolerance && (hi - lo) <= options.tolerance * std::max(1.0, hi)) {
      break;
    }
  }
  if (std::abs(g_hi) > options.tolerance) {
    throw NumericalError("bisection residual above tolerance", it);
  }
  return CriticalRadius{hi, std::abs(g_hi), it};
}

}  // namespace earlystop
