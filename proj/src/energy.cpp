#include "gradflux/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "gradflux/error.hpp"
#include "numeric.hpp"

namespace gradflux {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};


}  // namespace

double effective_conductance(const LatticeGraph& G, const std::vector<double>& weights,
                             const std::vector<std::size_t>& zero_set,
                             const std::vector<std::size_t>& one_set) {
  const std::size_t n = G.vertex_count();
  if (weights.size() != G.edge_count()) throw DomainError("one weight per edge is required");
  if (zero_set.empty() || one_set.empty()) throw DomainError("terminal sets must be nonempty");
  for (double w : weights)
    if (!(w >= 0)) throw DomainError("conductance weights must be nonnegative");
  UnionFind uf(n);
  for (std::size_t k = 0; k < G.edge_count(); ++k)
    if (std::isinf(weights[k])) uf.unite(G.edge(k).tail, G.edge(k).head);
  for (auto z : zero_set) uf.unite(z, zero_set.front());
  for (auto o : one_set) uf.unite(o, one_set.front());
  const std::size_t Z = uf.find(zero_set.front()), O = uf.find(one_set.front());
  if (Z == O) return kInf;

  // Reduced graph on contracted classes with finite positive weights.
  std::vector<std::size_t> cls(n);
  for (std::size_t v = 0; v < n; ++v) cls[v] = uf.find(v);
  struct RE { std::size_t a, b; double w; };
  std::vector<RE> red;
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t k = 0; k < G.edge_count(); ++k) {
    double w = weights[k];
    if (w == 0 || std::isinf(w)) continue;
    std::size_t a = cls[G.edge(k).tail], b = cls[G.edge(k).head];
    if (a == b) continue;
    adj[a].push_back(red.size());
    adj[b].push_back(red.size());
    red.push_back({a, b, w});
  }
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{Z};
  seen[Z] = 1;
  while (!stack.empty()) {
    auto x = stack.back();
    stack.pop_back();
    for (auto r : adj[x]) {
      auto y = red[r].a == x ? red[r].b : red[r].a;
      if (!seen[y]) {
        seen[y] = 1;
        stack.push_back(y);
      }
    }
  }
  if (!seen[O]) return 0.0;

  std::vector<std::ptrdiff_t> index(n, -1);
  std::ptrdiff_t m = 0;
  for (std::size_t v = 0; v < n; ++v)
    if (seen[v] && cls[v] == v && v != Z && v != O) index[v] = m++;
  std::vector<double> chi(n, 0.0);
  chi[O] = 1.0;
  if (m > 0) {
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (const auto& e : red) {
      if (!seen[e.a]) continue;
      auto ia = index[e.a], ib = index[e.b];
      if (ia >= 0) trip.emplace_back(ia, ia, e.w);
      if (ib >= 0) trip.emplace_back(ib, ib, e.w);
      if (ia >= 0 && ib >= 0) {
        trip.emplace_back(ia, ib, -e.w);
        trip.emplace_back(ib, ia, -e.w);
      }
      if (ia >= 0 && e.b == O) rhs[ia] += e.w;
      if (ib >= 0 && e.a == O) rhs[ib] += e.w;
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(std::max<Eigen::Index>(1000, 20 * m));
    cg.compute(A);
    Eigen::VectorXd x = cg.solve(rhs);
    double res = (A * x - rhs).norm();
    if (!(res <= 1e-10 * std::max(1.0, rhs.norm())))
      throw SolveError("conductance solve did not reach the residual tolerance");
    for (std::size_t v = 0; v < n; ++v)
      if (index[v] >= 0) chi[v] = x[index[v]];
  }
  double energy = 0.0;
  for (const auto& e : red)
    if (seen[e.a]) energy += e.w * (chi[e.a] - chi[e.b]) * (chi[e.a] - chi[e.b]);
  return energy;
}

double effective_conductance(const LatticeGraph& G, const std::vector<double>& weights,
                             std::size_t a, std::size_t b) {
  if (a == b) throw DomainError("conductance needs distinct vertices");
  return effective_conductance(G, weights, std::vector<std::size_t>{b}, std::vector<std::size_t>{a});
}

double hessian_weighted_conductance(const LatticeGraph& G, const Potential& U,
                                    const std::vector<double>& psi, std::size_t v) {
  G.require_surface_model();
  if (psi.size() != G.vertex_count()) throw DomainError("psi must assign every vertex");
  if (G.is_pinned(v)) throw DomainError("target vertex is pinned");
  std::vector<double> w(G.edge_count());
  for (std::size_t k = 0; k < G.edge_count(); ++k) {
    double r = psi[G.edge(k).head] - psi[G.edge(k).tail];
    double val = U.second_derivative(r);
    if (std::isnan(val)) val = U.second_derivative(r + 1e-12 * std::max(1.0, std::abs(r)));
    w[k] = val;
  }
  return effective_conductance(G, w, G.boundary(), std::vector<std::size_t>{v});
}

namespace {

// ADMM on the splitting z = grad phi for sum U(z); phi is fixed on `fixed`.
// Warm start only: coordinate descent stalls at kinks of nonsmooth U.
void admm_energy(const LatticeGraph& G, const Potential& U, const std::vector<char>& fixed,
                 std::vector<double>& phi) {
  const std::size_t n = G.vertex_count(), E = G.edge_count();
  std::vector<std::ptrdiff_t> index(n, -1);
  std::ptrdiff_t m = 0;
  for (std::size_t v = 0; v < n; ++v)
    if (!fixed[v]) index[v] = m++;
  if (m == 0) return;
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& e : G.edges()) {
    auto it = index[e.tail], ih = index[e.head];
    if (it >= 0) trip.emplace_back(it, it, 1.0);
    if (ih >= 0) trip.emplace_back(ih, ih, 1.0);
    if (it >= 0 && ih >= 0) {
      trip.emplace_back(it, ih, -1.0);
      trip.emplace_back(ih, it, -1.0);
    }
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolveError("ADMM Laplacian factorisation failed");

  std::vector<double> z(E), y(E, 0.0), zprev(E);
  for (std::size_t k = 0; k < E; ++k) z[k] = phi[G.edge(k).tail] - phi[G.edge(k).head];
  double rho = 1.0;
  Eigen::VectorXd rhs(m);
  for (std::size_t it = 0; it < 20000; ++it) {
    rhs.setZero();
    for (std::size_t k = 0; k < E; ++k) {
      const auto& e = G.edge(k);
      double c = z[k] - y[k];
      auto ti = index[e.tail], hi = index[e.head];
      if (ti >= 0) rhs[ti] += c + (hi < 0 ? phi[e.head] : 0.0);
      if (hi >= 0) rhs[hi] += -c + (ti < 0 ? phi[e.tail] : 0.0);
    }
    Eigen::VectorXd x = ldlt.solve(rhs);
    for (std::size_t v = 0; v < n; ++v)
      if (index[v] >= 0) phi[v] = x[index[v]];
    zprev = z;
    double primal = 0.0, dual = 0.0, scale = 1e-300;
    for (std::size_t k = 0; k < E; ++k) {
      double g = phi[G.edge(k).tail] - phi[G.edge(k).head];
      double c = g + y[k];
      double dU = U.derivative(c);
      double reach = (std::isfinite(dU) ? std::abs(dU) : 1.0) / rho + 1e-12;
      auto prox = [&](double s) { return U(s) + 0.5 * rho * (s - c) * (s - c); };
      z[k] = detail::minimize_on(prox, c - reach, c + reach).argmin;
      y[k] += g - z[k];
      primal = std::max(primal, std::abs(g - z[k]));
      dual = std::max(dual, rho * std::abs(z[k] - zprev[k]));
      scale = std::max(scale, std::abs(g));
    }
    if (primal <= 1e-9 * std::max(1.0, scale) && dual <= 1e-9) return;
    // Residual balancing; y is the scaled multiplier so it rescales with rho.
    if (it % 50 == 49) {
      double f = primal > 10 * dual ? 2.0 : dual > 10 * primal ? 0.5 : 1.0;
      if (f != 1.0) {
        rho *= f;
        for (auto& v : y) v /= f;
      }
    }
  }
}

}  // namespace

EnergyMinimum direct_energy_infimum(const LatticeGraph& G, const Potential& U, std::size_t a,
                                    std::size_t b, double tolerance) {
  const std::size_t n = G.vertex_count();
  if (a >= n || b >= n || a == b) throw DomainError("direct_energy_infimum needs distinct vertices");
  // Start from the graph-distance interpolation between the two terminals.
  auto bfs = [&](std::size_t s) {
    std::vector<double> d(n, kInf);
    std::vector<std::size_t> queue{s};
    d[s] = 0;
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (const auto& inc : G.incident(queue[h]))
        if (std::isinf(d[inc.neighbor])) {
          d[inc.neighbor] = d[queue[h]] + 1;
          queue.push_back(inc.neighbor);
        }
    return d;
  };
  auto da = bfs(a), db = bfs(b);
  EnergyMinimum out;
  out.phi.assign(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) out.phi[v] = db[v] / (da[v] + db[v]);
  out.phi[a] = 1.0;
  out.phi[b] = 0.0;
  auto& phi = out.phi;
  auto energy = [&]() {
    double e = 0;
    for (const auto& ed : G.edges()) e += U(phi[ed.tail] - phi[ed.head]);
    return e;
  };
  const bool quadratic = U.kind() == Potential::Kind::quadratic;
  if (!quadratic) {
    std::vector<char> fixed(n, 0);
    fixed[a] = fixed[b] = 1;
    admm_energy(G, U, fixed, phi);
    for (auto& x : phi) x = std::clamp(x, 0.0, 1.0);
  }
  double E = energy();
  for (std::size_t sweep = 1; sweep <= 200000; ++sweep) {
    double max_change = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (v == a || v == b) continue;
      auto inc = G.incident(v);
      double lo = 1.0, hi = 0.0, mean = 0.0;
      for (const auto& i : inc) {
        lo = std::min(lo, phi[i.neighbor]);
        hi = std::max(hi, phi[i.neighbor]);
        mean += phi[i.neighbor];
      }
      double x;
      if (quadratic) {
        x = mean / static_cast<double>(inc.size());
      } else {
        auto f = [&](double y) {
          double s = 0;
          for (const auto& i : inc) s += U(y - phi[i.neighbor]);
          return s;
        };
        x = detail::minimize_on(f, lo, hi).argmin;
        if (f(phi[v]) <= f(x)) x = phi[v];
      }
      max_change = std::max(max_change, std::abs(x - phi[v]));
      phi[v] = x;
    }
    double E_new = energy();
    double drop = E - E_new;
    E = E_new;
    out.sweeps = sweep;
    if (drop <= tolerance * std::max(1.0, E) && max_change <= 1e-9) {
      out.value = E;
      return out;
    }
  }
  throw ConvergenceError("direct_energy_infimum: coordinate descent did not converge");
}

GapTable::GapTable(const Potential& U, double r_max, std::size_t points)
    : r_max_(r_max), h_(r_max / static_cast<double>(points - 1)), w_(points), dw_(points) {
  if (!(r_max > 0) || points < 4) throw DomainError("GapTable needs r_max > 0 and >= 4 points");
  for (std::size_t k = 0; k < points; ++k) w_[k] = convexity_gap(U, h_ * static_cast<double>(k)).value;
  const std::size_t N = points - 1;
  dw_[0] = (-3 * w_[0] + 4 * w_[1] - w_[2]) / (2 * h_);
  dw_[N] = (3 * w_[N] - 4 * w_[N - 1] + w_[N - 2]) / (2 * h_);
  for (std::size_t k = 1; k < N; ++k) dw_[k] = (w_[k + 1] - w_[k - 1]) / (2 * h_);
  fallback_ = [U](double r) { return convexity_gap(U, r).value; };
}

double GapTable::operator()(double r) const {
  r = std::abs(r);
  if (r > r_max_) return fallback_(r);
  double pos = r / h_;
  auto k = std::min(static_cast<std::size_t>(pos), w_.size() - 2);
  double s = pos - static_cast<double>(k);
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * w_[k] + h10 * h_ * dw_[k] + h01 * w_[k + 1] + h11 * h_ * dw_[k + 1];
}

EtaEnergy d_eta_t(const LatticeGraph& G, const Potential& U, const std::vector<double>& eta,
                  double t, double tolerance) {
  G.require_surface_model();
  const std::size_t n = G.vertex_count();
  if (eta.size() != n) throw DomainError("eta must assign every vertex");
  std::size_t u = n;
  double support = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (G.is_pinned(v) || eta[v] == 0.0) continue;
    support += std::abs(eta[v]);
    if (u == n || std::abs(eta[v]) > std::abs(eta[u])) u = v;
  }
  if (u == n) throw DomainError("eta vanishes off the pinned set");
  EtaEnergy out;
  out.psi.assign(n, 0.0);
  auto& psi = out.psi;
  psi[u] = t / eta[u];
  if (t == 0.0) return out;
  GapTable W(U, 2.0 * std::abs(t) * support / (eta[u] * eta[u]) + 1e-9);
  auto local = [&](std::size_t v) {
    double s = 0;
    for (const auto& i : G.incident(v)) s += W(psi[v] - psi[i.neighbor]);
    return s;
  };
  auto energy = [&]() {
    double e = 0;
    for (const auto& ed : G.edges()) e += W(psi[ed.tail] - psi[ed.head]);
    return e;
  };
  double E = energy();
  for (std::size_t sweep = 1; sweep <= 1000000; ++sweep) {
    double max_change = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (G.is_pinned(v) || v == u) continue;
      const double ratio = eta[v] / eta[u];
      const double pv = psi[v], pu = psi[u];
      Minimum best;
      if (ratio == 0.0) {
        double lo = kInf, hi = -kInf;
        for (const auto& i : G.incident(v)) {
          lo = std::min(lo, psi[i.neighbor]);
          hi = std::max(hi, psi[i.neighbor]);
        }
        auto f = [&](double x) {
          psi[v] = x;
          return local(v);
        };
        best = detail::minimize_on(f, lo, hi);
        if (f(pv) <= best.value) best = {f(pv), pv};
        psi[v] = best.argmin;
      } else {
        bool adjacent = false;
        for (const auto& i : G.incident(v)) adjacent |= i.neighbor == u;
        auto f = [&](double delta) {
          psi[v] = pv + delta;
          psi[u] = pu - ratio * delta;
          double s = local(v) + local(u);
          if (adjacent) s -= W(psi[v] - psi[u]);
          return s;
        };
        best = detail::line_minimize(f, 1e-3 * std::max(1.0, std::abs(t)));
        if (f(0.0) <= best.value) best = {f(0.0), 0.0};
        psi[v] = pv + best.argmin;
        psi[u] = pu - ratio * best.argmin;
      }
      max_change = std::max({max_change, std::abs(psi[v] - pv), std::abs(psi[u] - pu)});
    }
    double E_new = energy();
    double drop = E - E_new;
    E = E_new;
    out.sweeps = sweep;
    if (drop <= tolerance * std::max(1.0, E) && max_change <= 1e-10 * std::max(1.0, std::abs(t))) {
      out.value = E;
      return out;
    }
  }
  throw ConvergenceError("d_eta_t: coordinate descent did not converge");
}

void fit_exponent(TailCurve& c) {
  const std::size_t n = c.t.size();
  if (n < 2) {
    c.exponent_fit = 0.0;
    c.residual = 0.0;
    return;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(c.t[k] > 0) || !(c.value[k] > 0)) throw DomainError("exponent fit needs positive data");
    x[k] = std::log(c.t[k]);
    y[k] = std::log(c.value[k]);
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double icpt = (sy - slope * sx) / n;
  double rss = 0;
  for (std::size_t k = 0; k < n; ++k) rss += std::pow(y[k] - icpt - slope * x[k], 2);
  c.exponent_fit = slope;
  c.residual = std::sqrt(rss / n);
}

TailCurve tail_bound(const LatticeGraph& G, const Potential& U, std::size_t v,
                     const std::vector<double>& t_grid, TailMode mode) {
  std::vector<double> eta(G.vertex_count(), 0.0);
  if (v >= eta.size()) throw DomainError("vertex out of range");
  eta[v] = 1.0;
  TailCurve c;
  TailCurve exponent;
  for (double t : t_grid) {
    double D = d_eta_t(G, U, eta, t).value;
    c.t.push_back(t);
    c.value.push_back(mode == TailMode::boundary_pinned ? std::exp(-D) : std::exp(-2 * D));
    if (t > 0 && D > 0) {
      exponent.t.push_back(t);
      exponent.value.push_back(D);
    }
  }
  fit_exponent(exponent);
  c.exponent_fit = exponent.exponent_fit;
  c.residual = exponent.residual;
  c.label = mode == TailMode::boundary_pinned ? "P(|phi(v)|>t) <= exp(-D(t))"
                                              : "P(|phi(v)-E phi(v)|>2(t+C)) <= exp(-2D(t)), C unknown";
  return c;
}

double tau(int d, double R) {
  if (d < 2) throw DomainError("tau needs d >= 2");
  if (!(R >= 0)) throw DomainError("tau needs R >= 0");
  return d == 2 ? std::sqrt(std::log(R + 1.0)) : 1.0;
}

}  // namespace gradflux
