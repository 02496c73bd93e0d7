#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include <boost/math/tools/minima.hpp>

#include "gradflux/error.hpp"
#include "gradflux/potential.hpp"

namespace gradflux::detail {

// Brent minimisation of a unimodal f on [lo, hi].
template <class F>
Minimum minimize_on(F&& f, double lo, double hi, int bits = 52) {
  if (!(hi > lo)) return {f(lo), lo};
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::brent_find_minima(f, lo, hi, bits, iters);
  double flo = f(lo), fhi = f(hi);
  Minimum best{r.second, r.first};
  if (flo < best.value) best = {flo, lo};
  if (fhi < best.value) best = {fhi, hi};
  return best;
}

// Bisection for the boundary between pred(lo) and !pred(lo).
template <class P>
double bisect_boundary(P&& pred, double lo, double hi, int iters = 80) {
  bool left = pred(lo);
  for (int i = 0; i < iters; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid) == left)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Minimise a convex f along the real line, starting from 0.
template <class F>
Minimum line_minimize(F&& f, double scale) {
  double f0 = f(0.0);
  double s = std::max(scale, 1e-12);
  double fp = f(s), fm = f(-s);
  if (fp >= f0 && fm >= f0) return minimize_on(f, -s, s);
  double dir = fp < fm ? 1.0 : -1.0;
  double prev = 0.0, cur = dir * s, fcur = std::min(fp, fm);
  for (int k = 0; k < 200; ++k) {
    double next = cur + (cur - prev) * 2.0;
    double fnext = f(next);
    if (fnext >= fcur) {
      double lo = std::min(prev, next), hi = std::max(prev, next);
      return minimize_on(f, lo, hi);
    }
    prev = cur;
    cur = next;
    fcur = fnext;
  }
  throw ConvergenceError("line minimisation failed to bracket a minimum");
}

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace gradflux::detail
