#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "gradflux/error.hpp"
#include "gradflux/logconcave.hpp"

using namespace gradflux;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

const double kPi = 3.14159265358979323846;

DensityGrid1D gaussian_grid() {
  return DensityGrid1D::from_log([](double s) { return 0.5 * s * s; }, -9, 9, 3601);
}
DensityGrid1D uniform_grid() {
  return DensityGrid1D::from_log([](double) { return 0.0; }, 0, 1, 2001);
}
DensityGrid1D laplace_grid() {
  return DensityGrid1D::from_log([](double s) { return std::abs(s); }, -34, 34, 6801);
}
DensityGrid1D exponential_grid() {
  return DensityGrid1D::from_log([](double s) { return s; }, 0, 34, 6801);
}
DensityGrid1D quartic_grid() {
  return DensityGrid1D::from_log([](double s) { return s * s * s * s; }, -2.5, 2.5, 4001);
}

// Normalising constant of exp(-s^4) on the line.
double quartic_mass() { return 2.0 * boost::math::tgamma(1.25); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("density statistics of standard families") {
  auto g = density_stats(gaussian_grid());
  CHECK(g.sup == doctest::Approx(1 / std::sqrt(2 * kPi)).epsilon(1e-9));
  CHECK(g.variance == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(g.median == doctest::Approx(0.0).scale(1));
  auto u = density_stats(uniform_grid());
  CHECK(u.sup == doctest::Approx(1.0));
  CHECK(u.variance == doctest::Approx(1.0 / 12).epsilon(1e-6));
  auto l = density_stats(laplace_grid());
  CHECK(l.sup == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(l.variance == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("density grid validation") {
  gaussian_grid().validate();
  quartic_grid().validate();
  auto bimodal = DensityGrid1D::from_log([](double s) { return -std::log(std::exp(-(s - 2) * (s - 2)) + std::exp(-(s + 2) * (s + 2))); }, -6, 6, 601);
  CHECK_THROWS_AS(bimodal.validate(), GridError);
  auto g = gaussian_grid();
  g.values[1800] *= 2;
  CHECK_THROWS_AS(g.validate(), GridError);
  CHECK_THROWS_AS(DensityGrid1D::from_values(0, 0.1, {1.0, -1.0, 1.0}), GridError);
}

TEST_CASE("level probability against the Gaussian closed form") {
  auto g = gaussian_grid();
  for (double x : {0.5, 1.0, 2.0}) {
    double p = std::exp(-0.5 * x * x) / std::sqrt(2 * kPi);
    CHECK(level_prob(g, p) == doctest::Approx(std::erfc(x / std::sqrt(2.0))).epsilon(1e-5));
  }
  CHECK(level_prob(uniform_grid(), 0.5) == 0.0);
}

TEST_CASE("one-dimensional log-concave facts") {
  auto u = check_prop21(uniform_grid());
  CHECK(u.tail.pass);
  CHECK(u.sup_over_a0 == doctest::Approx(1.0));
  auto g = check_prop21(gaussian_grid());
  CHECK(g.sup_times_sd == doctest::Approx(0.39894).epsilon(1e-4));
  CHECK(g.tail.pass);
  // Pr(|xi| > x) = 1/4 at x = 1.15035; sup / a0 = exp(x^2 / 2).
  CHECK(g.sup_over_a0 == doctest::Approx(std::exp(0.5 * 1.1503493803760083 * 1.1503493803760083)).epsilon(1e-4));
  auto e = check_prop21(exponential_grid());
  CHECK(e.sup_times_sd == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(e.tail.pass);
}

TEST_CASE("curvature tail of the log-density") {
  auto g = check_second_derivative_tail(gaussian_grid(), 4);
  CHECK(g.pass);
  CHECK(g.lhs == 0.0);
  auto u = check_second_derivative_tail(uniform_grid(), 8);
  CHECK(u.pass);
  CHECK(u.lhs == 0.0);
  // Mass where 12 s^2 > (4M)^2 for the quartic density, by adaptive quadrature.
  double M = 1.0 / quartic_mass();
  double s0 = 4 * M / std::sqrt(12.0);
  double tail = 2 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                        [](double s) { return std::exp(-s * s * s * s); }, s0, 6.0) * M;
  auto q = check_second_derivative_tail(quartic_grid(), 4);
  CHECK(q.pass);
  CHECK(q.lhs == doctest::Approx(tail).epsilon(2e-3));
  CHECK_THROWS_AS(check_second_derivative_tail(gaussian_grid(), 3), DomainError);
}

TEST_CASE("variance through quantitative one-dimensional log-concavity") {
  auto g = check_var_via_logconcavity(gaussian_grid(), 1.0, -std::expm1(-0.5));
  CHECK(g.premise_probability == doctest::Approx(1.0));
  CHECK(g.ratio == doctest::Approx(-std::expm1(-0.5)).epsilon(1e-6));
  auto u = check_var_via_logconcavity(uniform_grid(), 0.25, 0.9);
  CHECK(u.premise_probability == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(u.ratio == doctest::Approx(0.9 / 0.25 / std::sqrt(12.0)).epsilon(1e-5));
  // The two-sided exponential meets the premise only for delta <= 1 - 2/e.
  CHECK_THROWS_AS(check_var_via_logconcavity(laplace_grid(), 1.0, -std::expm1(-1.0)), PremiseNotMet);
  auto l = check_var_via_logconcavity(laplace_grid(), 1.0, 0.2);
  // Premise holds on |s| <= 1 + log(0.8).
  CHECK(l.premise_probability == doctest::Approx(1.0 - 1.0 / (0.8 * std::exp(1.0))).epsilon(5e-3));
  CHECK(l.ratio == doctest::Approx(std::sqrt(2.0) * 0.2).epsilon(1e-4));
}

TEST_CASE("Prekopa-Leindler on grids") {
  auto make = [](double shift, double lo, double h, std::size_t N) {
    Grid1D g;
    g.s_min = lo;
    g.h = h;
    for (std::size_t k = 0; k < N; ++k) {
      double s = lo + h * static_cast<double>(k) - shift;
      g.values.push_back(std::exp(-0.5 * s * s));
    }
    return g;
  };
  auto F = make(0, -12, 0.01, 2401);
  auto r = prekopa_leindler_check(F, F, F, 0.5);
  CHECK(r.pass);
  auto F1 = make(-1, -12, 0.01, 2401), F2 = make(1, -12, 0.01, 2401);
  auto s = prekopa_leindler_check(F1, F2, F, 0.5);
  CHECK(s.pass);
  CHECK(s.lhs == doctest::Approx(std::sqrt(2 * kPi)).epsilon(1e-9));
  Grid1D U;
  U.s_min = 0;
  U.h = 0.01;
  U.values.assign(101, 1.0);
  auto e = prekopa_leindler_check(U, U, U, 0.5);
  CHECK(e.lhs == doctest::Approx(e.rhs));
  CHECK(e.pass);
  auto narrow = make(0, -12, 0.01, 2401);
  for (auto& v : narrow.values) v *= 0.5;
  CHECK_THROWS_AS(prekopa_leindler_check(F, F, narrow, 0.5), HypothesisFailed);
}

TEST_CASE("inverse Hessian form") {
  CHECK(hess_inverse_form(Mat::Identity(3, 3), Vec::Unit(3, 1)) == doctest::Approx(1.0));
  Mat H = Mat::Zero(2, 2);
  H(0, 0) = 2;
  CHECK(hess_inverse_form(H, Vec::Unit(2, 0)) == doctest::Approx(0.5));
  CHECK(std::isinf(hess_inverse_form(H, Vec::Unit(2, 1))));
  CHECK(std::isinf(hess_inverse_form(H, v2(1, 1).normalized())));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    Mat A(3, 3);
    for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = nd(rng);
    Mat S = A * A.transpose() + 0.1 * Mat::Identity(3, 3);
    Vec n(3);
    n << nd(rng), nd(rng), nd(rng);
    n.normalize();
    CHECK(hess_inverse_form(S, n) == doctest::Approx(n.dot(S.inverse() * n)).epsilon(1e-8));
  }
  Mat neg = -Mat::Identity(2, 2);
  CHECK_THROWS_AS(hess_inverse_form(neg, Vec::Unit(2, 0)), DomainError);
}

TEST_CASE("marginal densities") {
  auto at_nodes = [](const DensityGrid1D& g, auto exact, double eps) {
    for (std::size_t k = 0; k < g.size(); k += 7) CHECK(g.values[k] == doctest::Approx(exact(g.node(k))).epsilon(eps).scale(1e-3));
  };
  auto gauss = [](double s) { return std::exp(-0.5 * s * s) / std::sqrt(2 * kPi); };
  at_nodes(marginal_density(LogConcaveDensity::standard_gaussian(2), Vec::Unit(2, 0)), gauss, 1e-6);
  auto sq = LogConcaveDensity::uniform_box(v2(-0.5, -0.5), v2(0.5, 0.5));
  at_nodes(marginal_density(sq, v2(1, 1)), [](double s) { return std::sqrt(2.0) - 2 * std::abs(s); }, 1e-6);
  at_nodes(marginal_density(LogConcaveDensity::quartic(2), Vec::Unit(2, 0)),
           [](double s) { return std::exp(-s * s * s * s) / quartic_mass(); }, 1e-6);
  Vec d3(3);
  d3 << 1, 1, 1;
  at_nodes(marginal_density(LogConcaveDensity::standard_gaussian(3), d3, 201), gauss, 1e-6);
}

TEST_CASE("normaliser of the Gaussian") {
  CHECK(LogConcaveDensity::standard_gaussian(2).log_normalizer() == doctest::Approx(std::log(2 * kPi)).epsilon(1e-9));
  auto q = LogConcaveDensity::quartic(2);
  CHECK(q.log_normalizer() == doctest::Approx(2 * std::log(quartic_mass())).epsilon(1e-8));
}

TEST_CASE("d_curvature examples and monotonicity") {
  auto G = LogConcaveDensity::standard_gaussian(2);
  for (double t : {0.3, 1.0, 2.5})
    CHECK(d_curvature(G, v2(0.6, 0.8), v2(0.4, -1.0), t).value == doctest::Approx(t * t / 2).epsilon(1e-10));
  auto Q = LogConcaveDensity::quartic(2);
  auto q = d_curvature(Q, Vec::Unit(2, 0), Vec::Zero(2), 1.0);
  CHECK(q.value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(q.witness[0] == doctest::Approx(1.0));
  CHECK(q.witness[1] == doctest::Approx(0.0).scale(1e-3));
  // Linear potential on a box: the symmetric difference cancels.
  auto lin = LogConcaveDensity::polynomial(Mat::Zero(2, 2), v2(0.7, -0.3), Vec::Zero(2),
                                           std::make_pair(v2(-1, -1), v2(1, 1)));
  CHECK(d_curvature(lin, v2(1, 0.5), v2(0.1, 0.2), 0.05).value == doctest::Approx(0.0).scale(1e-12));

  // Brute force over the slice for a mixed potential, and monotonicity in t.
  Mat A(2, 2);
  A << 1.0, 0.3, 0.3, 0.5;
  auto mixed = LogConcaveDensity::polynomial(A, v2(0.2, -0.1), v2(0.3, 0.8));
  Vec eta = v2(1.0, -2.0), x = v2(0.3, 0.4);
  double prev = 0.0;
  for (double t : {0.1, 0.4, 0.9, 1.6}) {
    double got = d_curvature(mixed, eta, x, t).value;
    Vec u = eta.normalized(), b = v2(-u[1], u[0]), o = x + t / eta.norm() * u;
    double best = 1e300;
    for (int k = -200000; k <= 200000; ++k) {
      Vec xp = o + (k * 2e-5) * b;
      best = std::min(best, 0.5 * (mixed.f(xp) + mixed.f(2 * x - xp)) - mixed.f(x));
    }
    CHECK(got <= best + 1e-12);
    CHECK(got == doctest::Approx(best).epsilon(1e-8));
    CHECK(got >= prev);
    prev = got;
  }
}

TEST_CASE("one-point convexity limit") {
  auto G = LogConcaveDensity::standard_gaussian(2);
  CHECK(one_point_convexity(G, v2(0.2, 0.1), v2(0.6, 0.8), 0.3) == doctest::Approx(0.09).epsilon(1e-10));
  Mat H(2, 2);
  H << 1, 0, 0, 4;
  auto D = LogConcaveDensity::gaussian(H);
  double g = 1e-3;
  CHECK(one_point_convexity(D, v2(0.5, 0.5), Vec::Unit(2, 1), g) / (g * g) == doctest::Approx(4.0).epsilon(1e-6));
  auto Q = LogConcaveDensity::quartic(2);
  CHECK(one_point_convexity(Q, v2(1, 1), Vec::Unit(2, 0), g) / (g * g) == doctest::Approx(12.0).epsilon(1e-3));
}

TEST_CASE("gamma_eta and the quantitative log-concavity inequality") {
  auto G = LogConcaveDensity::standard_gaussian(2);
  Vec e1 = Vec::Unit(2, 0);
  CHECK(gamma_eta(G, e1, 0.0, 0.3, 1.0).value == 1.0);
  CHECK(gamma_eta(G, e1, 0.5, 0.3, 1.0).value == doctest::Approx(1.0));
  CHECK(gamma_eta(G, e1, 0.5 + 1e-6, 0.3, 1.0).value == doctest::Approx(0.0));
  auto r = check_quantitative_logconcavity(G, e1, 0.0, 1.0, 0.5);
  CHECK(r.pass);
  CHECK(r.lhs == doctest::Approx(std::exp(-0.5)).epsilon(1e-10));
  CHECK(r.rhs == doctest::Approx(std::exp(-0.5)).epsilon(1e-10));
  auto Q = LogConcaveDensity::quartic(2);
  double D = d_curvature(Q, e1, Vec::Zero(2), 1.0).value;
  auto q = check_quantitative_logconcavity(Q, e1, 0.0, 1.0, D);
  CHECK(q.pass);
  auto z = check_quantitative_logconcavity(Q, v2(1, 2), 0.4, 0.7, 0.0);
  CHECK(z.pass);
  CHECK(z.rhs == 1.0);
}

TEST_CASE("lemma bounding the maximal marginal density") {
  auto G = LogConcaveDensity::standard_gaussian(2);
  auto a = check_lemma_app_main(G, Vec::Unit(2, 0), 1.0);
  CHECK(a.pass);
  CHECK(a.detail == "p = 1");
  CHECK(a.rhs == doctest::Approx(1 / (4 * std::sqrt(2.0))));
  CHECK(a.lhs == doctest::Approx(1 / std::sqrt(2 * kPi)).epsilon(1e-3));
  CHECK(a.lhs <= 1 / std::sqrt(2 * kPi));
  auto b = check_lemma_app_main(G, Vec::Unit(2, 0), 0.5);
  CHECK(b.pass);
  CHECK(b.rhs == 0.0);
  Mat one(1, 1);
  one << 1.0;
  Vec quarter(1);
  quarter << 0.25;
  auto d1 = LogConcaveDensity::polynomial(one, Vec::Zero(1), quarter);
  auto c = check_lemma_app_main(d1, Vec::Ones(1), 1.0);
  CHECK(c.pass);
  CHECK(c.detail == "p = 1");
}

TEST_CASE("marginal curvature of the Gaussian is the conditional Hessian average") {
  auto G = LogConcaveDensity::standard_gaussian(2);
  for (double s : {-1.0, 0.0, 0.8}) {
    auto r = check_marginal_curvature(G, v2(0.6, 0.8), s);
    CHECK(r.pass);
    CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.rhs == doctest::Approx(1.0).epsilon(1e-9));
  }
  auto Q = LogConcaveDensity::quartic(2);
  CHECK(check_marginal_curvature(Q, v2(1, 1), 0.3).pass);
}
