#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "gradflux/energy.hpp"
#include "gradflux/error.hpp"

using namespace gradflux;

namespace {

Eigen::MatrixXd laplacian(const LatticeGraph& G, const std::vector<double>& w) {
  const auto n = static_cast<Eigen::Index>(G.vertex_count());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < G.edge_count(); ++k) {
    auto a = static_cast<Eigen::Index>(G.edge(k).tail), b = static_cast<Eigen::Index>(G.edge(k).head);
    L(a, a) += w[k];
    L(b, b) += w[k];
    L(a, b) -= w[k];
    L(b, a) -= w[k];
  }
  return L;
}

// Two-point conductance from the pseudo-inverse of the dense Laplacian.
double oracle_conductance(const LatticeGraph& G, const std::vector<double>& w, std::size_t a,
                          std::size_t b) {
  Eigen::MatrixXd Lp = laplacian(G, w).completeOrthogonalDecomposition().pseudoInverse();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(Lp.rows());
  e[static_cast<Eigen::Index>(a)] = 1;
  e[static_cast<Eigen::Index>(b)] = -1;
  return 1.0 / e.dot(Lp * e);
}

// Dirichlet form restricted to the free vertices.
Eigen::MatrixXd free_block(const LatticeGraph& G, std::vector<std::size_t>& free) {
  Eigen::MatrixXd L = laplacian(G, std::vector<double>(G.edge_count(), 1.0));
  free.clear();
  for (std::size_t v = 0; v < G.vertex_count(); ++v)
    if (!G.is_pinned(v)) free.push_back(v);
  Eigen::MatrixXd B(free.size(), free.size());
  for (std::size_t i = 0; i < free.size(); ++i)
    for (std::size_t j = 0; j < free.size(); ++j) B(i, j) = L(free[i], free[j]);
  return B;
}

LatticeGraph random_connected_graph(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t v = 1; v < n; ++v) {
    std::size_t u = std::uniform_int_distribution<std::size_t>(0, v - 1)(rng);
    edges.emplace_back(u, v);
    seen.insert({u, v});
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (!seen.count({a, b}) && std::bernoulli_distribution(0.3)(rng)) edges.emplace_back(a, b);
  return LatticeGraph::custom(n, edges);
}

// Newton's method for sum (grad phi)^4 with phi(a) = 1, phi(b) = 0.
double oracle_quartic_energy(const LatticeGraph& G, std::size_t a, std::size_t b) {
  const std::size_t n = G.vertex_count();
  std::vector<double> phi(n, 0.5);
  phi[a] = 1;
  phi[b] = 0;
  auto energy = [&](const std::vector<double>& x) {
    double e = 0;
    for (const auto& ed : G.edges()) e += std::pow(x[ed.tail] - x[ed.head], 4);
    return e;
  };
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) * 1e-14;
    for (const auto& ed : G.edges()) {
      double r = phi[ed.tail] - phi[ed.head];
      g[ed.tail] += 4 * r * r * r;
      g[ed.head] -= 4 * r * r * r;
      double h = 12 * r * r;
      H(ed.tail, ed.tail) += h;
      H(ed.head, ed.head) += h;
      H(ed.tail, ed.head) -= h;
      H(ed.head, ed.tail) -= h;
    }
    for (auto fixed : {a, b}) {
      g[fixed] = 0;
      H.row(fixed).setZero();
      H.col(fixed).setZero();
      H(fixed, fixed) = 1;
    }
    Eigen::VectorXd step = H.ldlt().solve(g);
    double e0 = energy(phi), s = 1.0;
    for (;;) {
      std::vector<double> trial = phi;
      for (std::size_t v = 0; v < n; ++v) trial[v] -= s * step[v];
      if (energy(trial) <= e0 || s < 1e-12) {
        phi = trial;
        break;
      }
      s *= 0.5;
    }
  }
  return energy(phi);
}

IsoperimetryProfile synthetic_profile(std::size_t l, int d) {
  IsoperimetryProfile P;
  P.levels = l;
  for (std::size_t j = 1; j <= l; ++j) {
    double i = static_cast<double>(l - j);
    P.M.push_back(std::pow(2.0, i));
    P.m.push_back(std::pow(2.0, i * (d - 1.0) / d));
  }
  return P;
}

}  // namespace

TEST_CASE("effective conductance on small circuits") {
  auto path = LatticeGraph::custom(3, {{0, 1}, {1, 2}});
  CHECK(effective_conductance(path, {1, 1}, 0, 2) == doctest::Approx(0.5));
  auto tri = LatticeGraph::custom(3, {{0, 1}, {1, 2}, {0, 2}});
  CHECK(effective_conductance(tri, {1, 1, 1}, 0, 1) == doctest::Approx(1.5));
  CHECK(effective_conductance(path, {kInf, 2}, 0, 2) == doctest::Approx(2.0));
  CHECK(std::isinf(effective_conductance(path, {kInf, kInf}, 0, 2)));
  CHECK(effective_conductance(path, {1, 0}, 0, 2) == 0.0);
  CHECK_THROWS_AS(effective_conductance(path, {1, -1}, 0, 2), DomainError);
}

TEST_CASE("effective conductance matches the Laplacian pseudo-inverse") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> wd(0.2, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto G = random_connected_graph(rng, 3 + trial % 6);
    std::vector<double> w(G.edge_count());
    for (auto& x : w) x = wd(rng);
    std::size_t a = 0, b = G.vertex_count() - 1;
    CHECK(effective_conductance(G, w, a, b) == doctest::Approx(oracle_conductance(G, w, a, b)).epsilon(1e-9));
  }
}

TEST_CASE("hessian weighted conductance for the quadratic potential") {
  auto B = LatticeGraph::box(2, 5);
  std::vector<double> psi(B.vertex_count(), 0.3);
  std::size_t center = B.vertex_at({3, 3});
  double unit = effective_conductance(B, std::vector<double>(B.edge_count(), 1.0), B.boundary(), {center});
  CHECK(hessian_weighted_conductance(B, Potential::quadratic(), psi, center) == doctest::Approx(2 * unit));
  // U'' vanishes at zero gradient for x^4.
  CHECK(hessian_weighted_conductance(B, Potential::power(4), psi, center) == 0.0);
  CHECK(std::isinf(hessian_weighted_conductance(B, Potential::power(1.5), psi, center)));
}

TEST_CASE("direct energy infimum against independent oracles") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    auto G = random_connected_graph(rng, 3 + trial % 4);
    std::size_t a = 0, b = G.vertex_count() - 1;
    std::vector<double> ones(G.edge_count(), 1.0);
    CHECK(direct_energy_infimum(G, Potential::quadratic(), a, b).value ==
          doctest::Approx(effective_conductance(G, ones, a, b)).epsilon(1e-9));
    CHECK(direct_energy_infimum(G, Potential::power(4), a, b).value ==
          doctest::Approx(oracle_quartic_energy(G, a, b)).epsilon(1e-7));
    // For |x| the infimum is the minimum edge cut separating a from b.
    std::size_t best = G.edge_count();
    for (VertexMask X = 0; X < (VertexMask{1} << G.vertex_count()); ++X)
      if (((X >> a) & 1u) && !((X >> b) & 1u)) best = std::min(best, edge_boundary_size(G, X));
    double got = direct_energy_infimum(G, Potential::absolute(4), a, b).value;
    CHECK(got >= static_cast<double>(best) - 1e-9);
    CHECK(got == doctest::Approx(static_cast<double>(best)).epsilon(1e-6));
  }
}

TEST_CASE("simplex projection and separable programs") {
  auto p = project_to_simplex({0.5, 0.5, 0.5});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3));
  auto q = project_to_simplex({2.0, 0.0, -1.0});
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[1] == doctest::Approx(0.0));

  std::vector<double> a{1.0, 2.0, 5.0};
  std::vector<ConvexTerm> terms;
  for (double ai : a) terms.push_back({[ai](double x) { return ai * x * x; }, [ai](double x) { return 2 * ai * x; }});
  auto sol = minimize_on_simplex(terms);
  double inv = 1.0 + 0.5 + 0.2;
  CHECK(sol.value == doctest::Approx(1.0 / inv).epsilon(1e-12));
  CHECK(sol.x[0] == doctest::Approx(1.0 / inv).epsilon(1e-10));
  CHECK(sol.kkt_spread <= 1e-6);

  std::vector<ConvexTerm> linear;
  for (double c : {3.0, 1.5, 2.0}) linear.push_back({[c](double x) { return c * x; }, [c](double) { return c; }});
  auto lin = minimize_on_simplex(linear);
  CHECK(lin.value == doctest::Approx(1.5));
  CHECK(lin.x[1] == doctest::Approx(1.0));
}

TEST_CASE("simplex bound sits below the direct energy and above the corollary") {
  auto B = LatticeGraph::box(2, 3);
  auto cuts = connected_cuts(B);
  for (auto [a, b] : {std::pair<std::size_t, std::size_t>{0, 8}, {0, 4}, {1, 7}}) {
    SimplexBoundProblem P{isoperimetry_profile(B, a, cuts), isoperimetry_profile(B, b, cuts),
                          Potential::quadratic(), 1.0};
    auto s = simplex_energy_bound(P);
    CHECK(direct_energy_infimum(B, Potential::quadratic(), a, b).value >= s.value - 1e-8);
    CHECK(corollary_quadratic_bound(P.a, P.b, 2).value <= s.value + 1e-12);
    for (std::size_t i = 0; i < s.p.size(); ++i) {
      if (P.a.M[i]) CHECK(s.p[i] > 0);
      else CHECK(s.p[i] == 0);
    }
  }
}

TEST_CASE("corollary bound scaling with the level count") {
  double v8 = corollary_quadratic_bound(synthetic_profile(8, 2), synthetic_profile(8, 2), 2).value;
  double v16 = corollary_quadratic_bound(synthetic_profile(16, 2), synthetic_profile(16, 2), 2).value;
  CHECK(std::abs(v8 / v16 - 2.0) <= 1e-12);
  double v3a = corollary_quadratic_bound(synthetic_profile(8, 3), synthetic_profile(8, 3), 3).value;
  double v3b = corollary_quadratic_bound(synthetic_profile(16, 3), synthetic_profile(16, 3), 3).value;
  const double r = std::pow(2.0, -1.0 / 3);
  CHECK(v3a / v3b == doctest::Approx((1 - std::pow(r, 16)) / (1 - std::pow(r, 8))).epsilon(1e-12));
  CHECK_THROWS_AS(corollary_quadratic_bound(synthetic_profile(8, 2), synthetic_profile(8, 2), 2, 0.5, 1.0),
                  ProfileError);
}

TEST_CASE("d_eta_t against the Dirichlet form") {
  auto B = LatticeGraph::box(2, 5);
  std::vector<std::size_t> free;
  Eigen::MatrixXd Lf = free_block(B, free);
  Eigen::MatrixXd Ginv = Lf.inverse();
  std::size_t center = B.vertex_at({3, 3});
  std::size_t ci = std::find(free.begin(), free.end(), center) - free.begin();
  std::vector<double> eta(B.vertex_count(), 0.0);
  eta[center] = 1.0;
  for (double t : {0.5, 1.0, 2.0}) {
    double want = t * t / Ginv(ci, ci);
    CHECK(d_eta_t(B, Potential::quadratic(), eta, t).value == doctest::Approx(want).epsilon(1e-9));
    CHECK(d_eta_t(B, Potential::power_plus_quadratic(4), eta, t).value >= want - 1e-9);
    CHECK(d_eta_t(B, Potential::absolute(20), eta, t).value == doctest::Approx(0.0));
  }
  // Two-point functional: inf over <eta, psi> = t is t^2 / (eta^T G eta).
  std::size_t other = B.vertex_at({2, 3});
  std::size_t oi = std::find(free.begin(), free.end(), other) - free.begin();
  eta[other] = 0.5;
  double quad = Ginv(ci, ci) + 0.25 * Ginv(oi, oi) + Ginv(ci, oi);
  CHECK(d_eta_t(B, Potential::quadratic(), eta, 1.5).value == doctest::Approx(2.25 / quad).epsilon(1e-8));
}

TEST_CASE("tail bound and tau") {
  auto T = LatticeGraph::torus(2, 2);
  std::size_t v = T.vertex_at({1, 1});
  auto c = tail_bound(T, Potential::quadratic(), v, {0.0, 0.5, 1.0, 2.0});
  CHECK(c.value[0] == doctest::Approx(1.0));
  for (std::size_t k = 1; k < c.value.size(); ++k) CHECK(c.value[k] < c.value[k - 1]);
  CHECK(c.exponent_fit == doctest::Approx(2.0).epsilon(1e-6));
  auto m = tail_bound(T, Potential::quadratic(), v, {1.0}, TailMode::mode_centered);
  CHECK(m.value[0] == doctest::Approx(c.value[2] * c.value[2]));
  CHECK(tau(2, std::exp(1.0) - 1) == doctest::Approx(1.0));
  CHECK(tau(3, 100) == 1.0);
  CHECK_THROWS_AS(tau(1, 2), DomainError);
}

TEST_CASE("dstar curves are increasing and convex in log-log") {
  auto c = dstar_exponent(3, 4, {2, 4, 8, 16, 32, 64});
  for (std::size_t k = 1; k < c.value.size(); ++k) CHECK(c.value[k] > c.value[k - 1]);
  for (std::size_t k = 1; k + 1 < c.value.size(); ++k) {
    double s0 = std::log(c.value[k] / c.value[k - 1]), s1 = std::log(c.value[k + 1] / c.value[k]);
    CHECK(s1 >= s0 - 1e-9);
  }
}
