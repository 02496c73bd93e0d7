#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gradflux/energy.hpp"
#include "gradflux/error.hpp"
#include "gradflux/sampler.hpp"

using namespace gradflux;

namespace {

// Kolmogorov-Smirnov distance of a sample to a continuous CDF.
double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  double n = static_cast<double>(x.size()), d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double F = cdf(x[i]);
    d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
  }
  return d;
}

// CDF of exp(-energy) tabulated by Gauss-Kronrod on [lo, hi].
std::function<double(double)> quadrature_cdf(std::function<double(double)> energy, double lo, double hi) {
  const int N = 4000;
  double h = (hi - lo) / N;
  std::vector<double> F(N + 1, 0.0);
  for (int k = 0; k < N; ++k) {
    double a = lo + h * k;
    F[k + 1] = F[k] + boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
                          [&](double s) { return std::exp(-energy(s)); }, a, a + h);
  }
  double Z = F[N];
  for (auto& f : F) f /= Z;
  return [F, lo, h](double s) {
    double pos = (s - lo) / h;
    if (pos <= 0) return 0.0;
    if (pos >= N) return 1.0;
    auto k = static_cast<int>(pos);
    double w = pos - k;
    return F[k] + w * (F[k + 1] - F[k]);
  };
}

std::vector<double> draws(const ConditionalDensity& c, std::size_t n, std::uint64_t seed,
                          EnvelopeStats* stats = nullptr) {
  Rng rng(seed, 0);
  std::vector<double> out(n);
  for (auto& x : out) x = sample_conditional(c, rng, stats);
  return out;
}

ConditionalDensity make(const Potential& U, std::vector<double> a) {
  ConditionalDensity c;
  c.U = &U;
  c.neighbors = std::move(a);
  if (std::isfinite(U.half_width())) {
    for (double x : c.neighbors) {
      c.lo = std::max(c.lo, x - U.half_width());
      c.hi = std::min(c.hi, x + U.half_width());
    }
  }
  return c;
}

LatticeGraph two_vertex() { return LatticeGraph::custom(2, {{0, 1}}, {0}, {0.0}); }

// Covariance of the free sites of exp(-sum (grad phi)^2), zero boundary.
Eigen::MatrixXd gaussian_covariance(const LatticeGraph& G) {
  auto n = static_cast<Eigen::Index>(G.vertex_count());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : G.edges()) {
    auto a = static_cast<Eigen::Index>(e.tail), b = static_cast<Eigen::Index>(e.head);
    Q(a, a) += 2;
    Q(b, b) += 2;
    Q(a, b) -= 2;
    Q(b, a) -= 2;
  }
  for (std::size_t v : G.boundary()) {
    auto i = static_cast<Eigen::Index>(v);
    Q.row(i).setZero();
    Q.col(i).setZero();
    Q(i, i) = 1;
  }
  Eigen::MatrixXd S = Q.inverse();
  for (std::size_t v : G.boundary()) S(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) = 0;
  return S;
}

}  // namespace

TEST_CASE("conditional densities") {
  auto G = LatticeGraph::custom(4, {{0, 1}, {0, 2}, {0, 3}}, {1, 2, 3}, {1.0, 2.0, 6.0});
  std::vector<double> phi{0.0, 1.0, 2.0, 6.0};
  auto q = Potential::quadratic();
  auto c = conditional_density(G, q, phi, 0);
  // Completing the square: mean 3, variance 1/6.
  CHECK(c.log_density(3.5) - c.log_density(3.0) == doctest::Approx(-3 * 0.25));
  auto abs = Potential::absolute();
  auto flat = make(abs, {0.0, 1.0});
  CHECK(flat.energy(0.2) == doctest::Approx(flat.energy(0.9)));
  CHECK(flat.energy(2.0) - flat.energy(1.0) == doctest::Approx(2.0));
  auto quartic = Potential::power(4);
  CHECK(make(quartic, {0.0}).energy(1.3) == doctest::Approx(std::pow(1.3, 4)));
  CHECK_THROWS_AS(conditional_density(G, q, phi, 1), DomainError);
}

TEST_CASE("Gaussian conditional moments") {
  auto q = Potential::quadratic();
  auto x = draws(make(q, {1.0, 2.0, 6.0}), 100000, 3);
  double m = 0, v = 0;
  for (double s : x) m += s;
  m /= x.size();
  for (double s : x) v += (s - m) * (s - m);
  v /= x.size() - 1;
  double sd = std::sqrt(1.0 / 6);
  CHECK(std::abs(m - 3.0) < 4 * sd / std::sqrt(1e5));
  CHECK(v == doctest::Approx(1.0 / 6).epsilon(0.02));
}

TEST_CASE("flat conditional of the absolute value") {
  auto abs = Potential::absolute();
  EnvelopeStats st;
  auto x = draws(make(abs, {0.0, 1.0}), 100000, 5, &st);
  CHECK(st.acceptance() >= 0.5);
  auto cdf = [](double s) {
    if (s < 0) return std::exp(2 * s) / 4;
    if (s <= 1) return 0.25 + s / 2;
    return 1 - std::exp(-2 * (s - 1)) / 4;
  };
  CHECK(ks_distance(x, cdf) < 0.01);
}

TEST_CASE("exactness on one free site for every built-in potential") {
  std::vector<double> a{-0.3, 0.5, 1.2};
  std::vector<Potential> Us{Potential::quadratic(), Potential::power(1.5), Potential::power(4),
                            Potential::power_plus_quadratic(3), Potential::absolute()};
  for (const auto& U : Us) {
    CAPTURE(U.describe());
    auto c = make(U, a);
    EnvelopeStats st;
    auto x = draws(c, 100000, 11, &st);
    auto cdf = quadrature_cdf([&](double s) { return c.energy(s); }, -12, 12);
    CHECK(ks_distance(x, cdf) < 0.01);
    CHECK(st.acceptance() > 0.3);
  }
  auto quartic = Potential::power(4);
  auto x = draws(make(quartic, {0.0}), 100000, 2);
  auto cdf = quadrature_cdf([](double s) { return s * s * s * s; }, -4, 4);
  CHECK(ks_distance(x, cdf) < 0.01);
}

TEST_CASE("conditional with a bounded domain") {
  auto U = Potential::custom({-1, -0.5, 0, 0.5, 1}, {2, 0.5, 0, 0.5, 2});
  auto c = make(U, {0.0, 0.8});
  CHECK(c.lo == doctest::Approx(-0.2));
  CHECK(c.hi == doctest::Approx(1.0));
  auto x = draws(c, 50000, 7);
  CHECK(*std::min_element(x.begin(), x.end()) >= c.lo);
  CHECK(*std::max_element(x.begin(), x.end()) <= c.hi);
  auto cdf = quadrature_cdf([&](double s) { return c.energy(s); }, c.lo, c.hi);
  CHECK(ks_distance(x, cdf) < 0.015);
}

TEST_CASE("two-vertex chain has the Gaussian stationary law") {
  auto G = two_vertex();
  auto q = Potential::quadratic();
  ChainConfig cfg;
  cfg.chains = 4;
  cfg.samples = 25000;
  cfg.seed = 9;
  auto s = run_chains(G, q, cfg, {0, 1});
  std::vector<double> all;
  for (const auto& c : s.series(1)) all.insert(all.end(), c.begin(), c.end());
  CHECK(ks_distance(all, [](double x) { return 0.5 * std::erfc(-x); }) < 0.01);
  auto var = variance_estimate(s, 1);
  CHECK(std::abs(var.value - 0.5) < 3 * var.se + 1e-12);
  auto pinned = variance_estimate(s, 0);
  CHECK(pinned.value == 0.0);
  for (std::size_t c = 0; c < s.chains; ++c)
    for (std::size_t k = 0; k < s.per_chain; ++k) REQUIRE(s.value(c, k, 0) == 0.0);
  auto tails = tail_estimate(s, 1, {0.0, 2 * std::sqrt(0.5)});
  CHECK(tails[0].value == 1.0);
  CHECK(std::abs(tails[1].value - std::erfc(std::sqrt(2.0))) < 3 * tails[1].se + 1e-3);
}

TEST_CASE("quartic torus is symmetric") {
  auto T = LatticeGraph::torus(2, 2);
  auto U = Potential::power(4);
  ChainConfig cfg;
  cfg.chains = 4;
  cfg.samples = 20000;
  cfg.seed = 4;
  std::size_t v = T.vertex_at({2, 2});
  auto s = run_chains(T, U, cfg, {v});
  for (std::size_t c = 0; c < s.chains; ++c) {
    auto one = batch_means({s.series(v)[c]});
    CHECK(std::abs(one.value) < 3 * one.se + 1e-12);
  }
  std::vector<std::vector<double>> cubes = s.series(v);
  for (auto& c : cubes)
    for (auto& x : c) x = x * x * x;
  auto skew = batch_means(cubes);
  CHECK(std::abs(skew.value) < 3 * skew.se + 1e-12);
  CHECK(s.envelope[0].acceptance() > 0.5);
}

TEST_CASE("Gaussian box variance against the network oracle") {
  auto B = LatticeGraph::box(2, 4);
  auto q = Potential::quadratic();
  auto S = gaussian_covariance(B);
  std::size_t v = B.vertex_at({2, 2});
  std::vector<double> unit(B.edge_count(), 1.0);
  double cond = effective_conductance(B, unit, B.boundary(), {v});
  // Var = 1 / (2 C_eff) for a single vertex against the grounded boundary.
  CHECK(S(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) == doctest::Approx(0.5 / cond).epsilon(1e-9));
  ChainConfig cfg;
  cfg.chains = 4;
  cfg.samples = 50000;
  cfg.seed = 21;
  auto s = run_chains(B, q, cfg, {v});
  auto var = variance_estimate(s, v);
  CHECK(std::abs(var.value - 0.5 / cond) < 3 * var.se);

  // Pinning one more vertex cannot increase the variance.
  std::size_t w = B.vertex_at({3, 3});
  auto bnd = B.boundary();
  bnd.push_back(w);
  auto B2 = B.with_boundary(bnd);
  auto s2 = run_chains(B2, q, cfg, {v});
  auto var2 = variance_estimate(s2, v);
  CHECK(var2.value <= var.value + 3 * std::hypot(var.se, var2.se));
  CHECK(gaussian_covariance(B2)(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) <= 0.5 / cond);
}

TEST_CASE("gradient event probabilities") {
  auto T = LatticeGraph::torus(2, 2);
  auto q = Potential::quadratic();
  std::size_t e = 5;
  auto S = gaussian_covariance(T);
  const auto& E = T.edge(e);
  auto h = static_cast<Eigen::Index>(E.head), t = static_cast<Eigen::Index>(E.tail);
  double var = S(h, h) + S(t, t) - 2 * S(h, t);
  double exact = std::erf(0.1 / std::sqrt(2 * var));
  ChainConfig cfg;
  cfg.chains = 4;
  cfg.samples = 25000;
  cfg.seed = 8;
  auto s = run_chains(T, q, cfg, {},
                      {gradient_event(T, {}, {{0.0, 1.0}}), gradient_event(T, {e}, {{0.0, kInf}}),
                       gradient_event(T, {e}, {{0.0, 0.1}})});
  CHECK(event_probability(s, 0).value == 1.0);
  CHECK(event_probability(s, 1).value == 1.0);
  auto p = event_probability(s, 2);
  CHECK(std::abs(p.value - exact) < 3 * p.se);
}

TEST_CASE("chessboard estimate") {
  auto T = LatticeGraph::torus(2, 2);
  auto q = Potential::quadratic();
  auto classes = axis_parity_classes(T);
  const auto& cls = classes[1].edges;
  ChainConfig cfg;
  cfg.chains = 4;
  cfg.samples = 20000;
  cfg.seed = 12;
  auto whole = chessboard_check(T, q, cfg, cls, {{0.3, kInf}});
  CHECK(whole.pass);
  CHECK(whole.lhs == doctest::Approx(whole.rhs));
  auto single = chessboard_check(T, q, cfg, {cls[0]}, {{1.0, kInf}});
  CHECK(single.pass);
  std::vector<std::size_t> half(cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(cls.size() / 2));
  auto h = chessboard_check(T, q, cfg, half, {{0.5, kInf}});
  CHECK(h.pass);
  CHECK_THROWS_AS(chessboard_events(T, {classes[0].edges[0], classes[1].edges[0]}, {{0.0, 1.0}}), DomainError);
}

TEST_CASE("good edges and the key lemma event") {
  auto T = LatticeGraph::torus(2, 2);
  auto q = Potential::quadratic();
  std::vector<double> phi(T.vertex_count());
  for (std::size_t v = 0; v < phi.size(); ++v) phi[v] = T.is_pinned(v) ? 0.0 : 0.1 * static_cast<double>(v % 5);
  auto all = good_edge_component(T, q, phi, 1.0, 0);
  CHECK(std::count(all.good.begin(), all.good.end(), 1) == static_cast<long>(T.edge_count()));
  CHECK(all.component.vertices.size() == T.vertex_count());
  auto none = good_edge_component(T, q, phi, 3.0, 0);
  CHECK(std::count(none.good.begin(), none.good.end(), 1) == 0);
  CHECK(none.component.vertices.size() == 1);

  auto quartic = Potential::power(4);
  std::vector<double> ramp(T.vertex_count());
  for (std::size_t v = 0; v < ramp.size(); ++v) ramp[v] = T.is_pinned(v) ? 0.0 : 1.0 + 0.37 * static_cast<double>(v);
  std::size_t flat = T.edge_count();
  for (std::size_t e = 0; e < T.edge_count(); ++e) {
    if (!T.is_pinned(T.edge(e).tail) && !T.is_pinned(T.edge(e).head)) {
      flat = e;
      break;
    }
  }
  ramp[T.edge(flat).head] = ramp[T.edge(flat).tail];
  auto g = good_edge_component(T, quartic, ramp, 0.1, 0);
  CHECK(g.good[flat] == 0);

  std::size_t v = T.vertex_at({1, 1});
  ChainConfig cfg;
  cfg.chains = 2;
  cfg.samples = 8000;
  cfg.seed = 3;
  auto s = run_chains(T, q, cfg, {}, {key_lemma_event(T, q, 1.0, 1e-9, v), key_lemma_event(T, q, 3.0, 1e-9, v)});
  CHECK(key_lemma_frequency(s, 0).value == 1.0);
  CHECK(key_lemma_frequency(s, 1).value == 0.0);
}

TEST_CASE("integrated autocorrelation of an AR(1) series") {
  Rng rng(1, 0);
  const double a = 0.8;
  std::vector<double> x(200000);
  double y = 0;
  for (auto& v : x) {
    y = a * y + rng.normal();
    v = y;
  }
  // tau = (1 + a) / (1 - a).
  CHECK(integrated_autocorrelation(x) == doctest::Approx(9.0).epsilon(0.1));
  std::vector<double> few(500, 1.0);
  CHECK_THROWS_AS(batch_means({few}), InsufficientSamples);
}

TEST_CASE("chains are reproducible and independent of the worker count") {
  auto T = LatticeGraph::torus(2, 2);
  auto U = Potential::power_plus_quadratic(4);
  ChainConfig cfg;
  cfg.chains = 3;
  cfg.samples = 500;
  cfg.seed = 77;
  cfg.thinning = 2;
  auto a = run_chains(T, U, cfg, {1, 5});
  auto b = run_chains(T, U, cfg, {1, 5});
  cfg.workers = 3;
  auto c = run_chains(T, U, cfg, {1, 5});
  CHECK(a.values == b.values);
  CHECK(a.values == c.values);
  cfg.seed = 78;
  auto d = run_chains(T, U, cfg, {1, 5});
  CHECK(a.values != d.values);
  CHECK(a.sweep.back() == default_burn_in(T) + 1000);
}
