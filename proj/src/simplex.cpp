#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradflux/energy.hpp"
#include "gradflux/error.hpp"

namespace gradflux {

std::vector<double> project_to_simplex(std::vector<double> y) {
  const std::size_t n = y.size();
  if (n == 0) return y;
  std::vector<double> u = y;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cumsum += u[k];
    double cand = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - cand > 0) theta = cand;
  }
  for (auto& v : y) v = std::max(v - theta, 0.0);
  return y;
}

namespace {

double objective(const std::vector<ConvexTerm>& terms, const std::vector<double>& x) {
  double s = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) s += terms[i].value(x[i]);
  return s;
}

// sup{x in [0,1] : g'(x) <= beta} (strict: g'(x) < beta), 0 when empty.
double level_point(const ConvexTerm& g, double beta, bool strict) {
  auto below = [&](double x) {
    double d = g.derivative(x);
    return strict ? d < beta : d <= beta;
  };
  if (!below(0.0)) return 0.0;
  if (below(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < 200; ++k) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (below(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

SimplexSolution minimize_on_simplex(const std::vector<ConvexTerm>& terms) {
  const std::size_t n = terms.size();
  if (n == 0) throw DomainError("simplex program has no coordinates");
  SimplexSolution sol;

  // Projected gradient with backtracking.
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  double fx = objective(terms, x);
  double step = 1.0;
  for (std::size_t it = 0; it < 5000; ++it) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = terms[i].derivative(x[i]);
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - step * g[i];
      auto z = project_to_simplex(std::move(y));
      double lin = 0, quad = 0;
      for (std::size_t i = 0; i < n; ++i) {
        lin += g[i] * (z[i] - x[i]);
        quad += (z[i] - x[i]) * (z[i] - x[i]);
      }
      double fz = objective(terms, z);
      if (fz <= fx + lin + quad / (2 * step) + 1e-15 * std::abs(fx)) {
        moved = quad > 1e-30;
        x = std::move(z);
        fx = fz;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    sol.iterations = it + 1;
    if (!moved) break;
  }

  // Exact multiplier: beta* = inf{beta : sum_i sup{x_i : g_i'(x_i) <= beta} >= 1}.
  auto total = [&](double beta, bool strict) {
    double s = 0;
    for (const auto& t : terms) s += level_point(t, beta, strict);
    return s;
  };
  double lo = kInf, hi = -kInf;
  for (const auto& t : terms) {
    lo = std::min(lo, t.derivative(0.0));
    hi = std::max(hi, t.derivative(1.0));
  }
  lo = lo - 1e-9 * std::max(1.0, std::abs(lo));
  if (total(lo, false) >= 1.0) lo -= 1.0;
  for (int k = 0; k < 2000; ++k) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (total(mid, false) >= 1.0)
      hi = mid;
    else
      lo = mid;
  }
  std::vector<double> lower(n), upper(n);
  double sl = 0, su = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lower[i] = level_point(terms[i], hi, true);
    upper[i] = level_point(terms[i], hi, false);
    sl += lower[i];
    su += upper[i];
  }
  if (sl > 1.0) {
    for (std::size_t i = 0; i < n; ++i) {
      upper[i] = lower[i];
      lower[i] = level_point(terms[i], lo, false);
    }
    sl = std::accumulate(lower.begin(), lower.end(), 0.0);
    su = std::accumulate(upper.begin(), upper.end(), 0.0);
  }
  double theta = su > sl ? (1.0 - sl) / (su - sl) : 0.0;
  theta = std::clamp(theta, 0.0, 1.0);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = lower[i] + theta * (upper[i] - lower[i]);
  double sw = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= sw;
  double fw = objective(terms, w);

  // The projected-gradient iterate is feasible, so it can never beat the exact
  // multiplier solution by more than roundoff.
  if (fx < fw - 1e-9 * std::max(1.0, std::abs(fw)))
    throw ConvergenceError("simplex program: multiplier solution is not optimal");
  sol.x = std::move(w);
  sol.value = fw;
  sol.multiplier = hi;
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (sol.x[i] > 1e-12) {
      double d = terms[i].derivative(sol.x[i]);
      double dl = terms[i].derivative(std::max(0.0, sol.x[i] - 1e-13));
      double gap = std::min(std::abs(d - hi), std::abs(dl - hi));
      if (d >= hi && dl <= hi) gap = 0.0;
      spread = std::max(spread, gap / std::max(1.0, std::abs(hi)));
    }
  sol.kkt_spread = spread;
  if (spread > 1e-6) throw ConvergenceError("simplex program failed the KKT check");
  return sol;
}

SimplexBound simplex_energy_bound(const SimplexBoundProblem& P) {
  if (P.a.levels != P.b.levels) throw ProfileError("profiles must share the level count");
  if (std::abs(P.U(0.0)) > 1e-12) throw DomainError("simplex bound needs U(0) = 0");
  const std::size_t l = P.a.levels;
  std::vector<ConvexTerm> terms;
  std::vector<std::pair<int, std::size_t>> slot;  // (side, level index)
  const Potential U = P.U;
  const double t = P.t;
  auto add = [&](const IsoperimetryProfile& prof, int side) {
    for (std::size_t i = 0; i < l; ++i) {
      if (!prof.M[i] || !prof.m[i]) continue;
      double M = *prof.M[i], m = *prof.m[i];
      if (!(M > 0) || m < 0) throw ProfileError("profile entries must satisfy M > 0, m >= 0");
      double scale = m * t / M;
      terms.push_back({[U, M, scale](double x) { return M * U(x * scale); },
                       [U, M, scale](double x) { return M * scale * U.derivative(x * scale); }});
      slot.emplace_back(side, i);
    }
  };
  add(P.a, 0);
  add(P.b, 1);
  if (terms.empty()) throw ProfileError("no defined profile levels");
  auto sol = minimize_on_simplex(terms);
  SimplexBound out;
  out.value = sol.value;
  out.p.assign(l, 0.0);
  out.q.assign(l, 0.0);
  for (std::size_t k = 0; k < slot.size(); ++k)
    (slot[k].first == 0 ? out.p : out.q)[slot[k].second] = sol.x[k];
  out.multiplier = sol.multiplier;
  out.kkt_spread = sol.kkt_spread;
  return out;
}

namespace {

CorollaryBound corollary_value(std::size_t l, int d, double C, double c) {
  CorollaryBound r;
  r.C = C;
  r.c = c;
  r.c0 = c * c / C;
  double inv = 0.0;
  for (std::size_t i = 0; i < l; ++i) inv += 2.0 * std::pow(2.0, -static_cast<double>(i) * (1.0 - 2.0 / d));
  r.value = r.c0 / inv;
  return r;
}

}  // namespace

CorollaryBound corollary_quadratic_bound(const IsoperimetryProfile& a,
                                         const IsoperimetryProfile& b, int d, double C, double c) {
  if (a.levels != b.levels) throw ProfileError("profiles must share the level count");
  if (d < 2) throw ProfileError("corollary bound needs d >= 2");
  if (!(C > 0) || !(c > 0)) throw ProfileError("profile constants must be positive");
  const std::size_t l = a.levels;
  for (const auto* prof : {&a, &b})
    for (std::size_t j = 1; j <= l; ++j) {
      if (!prof->M[j - 1] || !prof->m[j - 1]) continue;
      double i = static_cast<double>(l - j);
      if (*prof->M[j - 1] > C * std::pow(2.0, i) * (1 + 1e-12))
        throw ProfileError("profile violates M_{l-i} <= C 2^i");
      if (*prof->m[j - 1] < c * std::pow(2.0, i * (d - 1.0) / d) * (1 - 1e-12))
        throw ProfileError("profile violates m_{l-i} >= c 2^{i(d-1)/d}");
    }
  return corollary_value(l, d, C, c);
}

CorollaryBound corollary_quadratic_bound(const IsoperimetryProfile& a,
                                         const IsoperimetryProfile& b, int d) {
  if (a.levels != b.levels) throw ProfileError("profiles must share the level count");
  const std::size_t l = a.levels;
  double C = 0.0, c = kInf;
  bool any = false;
  for (const auto* prof : {&a, &b})
    for (std::size_t j = 1; j <= l; ++j) {
      if (!prof->M[j - 1] || !prof->m[j - 1]) continue;
      any = true;
      double i = static_cast<double>(l - j);
      C = std::max(C, *prof->M[j - 1] / std::pow(2.0, i));
      c = std::min(c, *prof->m[j - 1] / std::pow(2.0, i * (d - 1.0) / d));
    }
  if (!any) throw ProfileError("no defined profile levels");
  return corollary_quadratic_bound(a, b, d, C, c);
}

TailCurve dstar_exponent(int d, double p, const std::vector<double>& t_grid, std::size_t l) {
  if (d < 2) throw DomainError("dstar_exponent needs d >= 2");
  if (!(p >= 2.0)) throw DomainError("dstar_exponent needs p >= 2");
  if (l == 0) throw DomainError("dstar_exponent needs l >= 1");
  TailCurve c;
  c.label = "D*(t)";
  for (double t : t_grid) {
    if (!(t > 0)) throw DomainError("t must be positive");
    std::vector<ConvexTerm> terms;
    for (std::size_t i = 0; i < l; ++i) {
      double a2 = std::pow(2.0, static_cast<double>(i) * (1.0 - 2.0 / d)) * t * t;
      double ap = std::pow(2.0, static_cast<double>(i) * (1.0 - p / d)) * std::pow(t, p);
      terms.push_back({[a2, ap, p](double x) { return a2 * x * x + ap * std::pow(x, p); },
                       [a2, ap, p](double x) { return 2 * a2 * x + p * ap * std::pow(x, p - 1); }});
    }
    auto sol = minimize_on_simplex(terms);
    c.t.push_back(t);
    c.value.push_back(sol.value);
  }
  fit_exponent(c);
  return c;
}

}  // namespace gradflux
