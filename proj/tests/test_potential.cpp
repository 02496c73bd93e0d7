#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "gradflux/error.hpp"
#include "gradflux/potential.hpp"

using namespace gradflux;

namespace {

// Dense-grid infimum of the second-order ratio in long double on [1e-3, 1e3],
// combined with the t -> 0 limit U''(s) for smooth U.
double brute_ratio(const Potential& U, double s) {
  auto u = [&](long double x) {
    long double a = x < 0 ? -x : x;
    long double v = std::pow(a, static_cast<long double>(U.exponent()));
    if (U.kind() == Potential::Kind::power_plus_quadratic) v += x * x;
    return v;
  };
  long double best = U.second_derivative(s);
  for (int k = 0; k <= 60000; ++k) {
    long double t = 1e-3L * std::pow(10.0L, 6.0L * k / 60000.0L);
    long double num = u(s + t) + u(s - t) - 2 * u(s);
    long double den = t < 1 ? t * t : 1.0L;
    best = std::min(best, num / den);
  }
  return static_cast<double>(best);
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  double h = (b - a) / n, acc = f(a) + f(b);
  for (int k = 1; k < n; ++k) acc += f(a + k * h) * (k % 2 ? 4 : 2);
  return acc * h / 3;
}

}  // namespace

TEST_CASE("eval on the closed-form families") {
  CHECK(Potential::quadratic()(2.0) == doctest::Approx(4.0));
  CHECK(Potential::power_plus_quadratic(3)(1.0) == doctest::Approx(2.0));
  CHECK(Potential::power(1.5)(-4.0) == doctest::Approx(8.0));
  CHECK(Potential::power(4)(-1.5) == doctest::Approx(5.0625));
  auto abs = Potential::absolute(10);
  CHECK(abs(-3.25) == doctest::Approx(3.25));
  CHECK(std::isinf(abs(10.5)));
}

TEST_CASE("second derivative") {
  CHECK(Potential::power(4).second_derivative(1.0) == doctest::Approx(12.0));
  CHECK(Potential::power(4).second_derivative(0.0) == 0.0);
  CHECK(std::isinf(Potential::power(1.5).second_derivative(0.0)));
  CHECK(Potential::quadratic().second_derivative(-7.0) == 2.0);
  CHECK(Potential::power_plus_quadratic(4).second_derivative(2.0) == doctest::Approx(50.0));
  CHECK_THROWS_AS(Potential::absolute(5).second_derivative(6.0), DomainError);
}

TEST_CASE("constructors reject invalid parameters") {
  CHECK_THROWS_AS(Potential::power(1.0), DomainError);
  CHECK_THROWS_AS(Potential::power_plus_quadratic(2.0), DomainError);
  CHECK_THROWS_AS(Potential::custom({-1, 0, 1}, {1, 0, 2}), DomainError);       // not even
  CHECK_THROWS_AS(Potential::custom({-1, 0, 1}, {0, 1, 0}), DomainError);       // not convex
  CHECK_THROWS_AS(Potential::custom({-1, 0.2, 1}, {1, 0, 1}), DomainError);     // not uniform
  CHECK_NOTHROW(Potential::custom({-2, -1, 0, 1, 2}, {4, 1, 0, 1, 4}));
}

TEST_CASE("second_order_ratio examples") {
  auto quad = Potential::quadratic();
  for (double s : {-3.0, 0.0, 0.7, 5.0}) CHECK(second_order_ratio(quad, s).value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(second_order_ratio(Potential::power(4), 0.0).value < 1e-10);
  // 12 t^2 + 2 t^4 over t^2 tends to 12 as t -> 0.
  CHECK(second_order_ratio(Potential::power(4), 1.0).value == doctest::Approx(12.0).epsilon(1e-9));
  auto abs = Potential::absolute(20);
  CHECK(second_order_ratio(abs, 1.0).value == doctest::Approx(0.0));
  CHECK(second_order_ratio(abs, 0.0).value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK_THROWS_AS(second_order_ratio(abs, 21.0), DomainError);
}

TEST_CASE("second_order_ratio agrees with a dense brute-force search") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> s_dist(-2.5, 2.5);
  for (auto U : {Potential::power(1.5), Potential::power(3), Potential::power_plus_quadratic(4),
                 Potential::quadratic()}) {
    for (int k = 0; k < 5; ++k) {
      double s = s_dist(rng);
      double got = second_order_ratio(U, s).value;
      double want = brute_ratio(U, s);
      CHECK(got <= want + 1e-9 * std::max(1.0, want));
      CHECK(got == doctest::Approx(want).epsilon(1e-4));
    }
  }
}

TEST_CASE("second derivative dominates the ratio") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s_dist(-3, 3);
  for (auto U : {Potential::power(1.5), Potential::power(4), Potential::power_plus_quadratic(3),
                 Potential::quadratic()}) {
    for (int k = 0; k < 20; ++k) {
      double s = s_dist(rng);
      CHECK(second_order_ratio(U, s).value <= U.second_derivative(s) * (1 + 1e-9) + 1e-12);
    }
  }
}

TEST_CASE("convexity_gap against closed forms") {
  for (double r : {0.1, 0.5, 1.0, 2.5}) {
    CHECK(convexity_gap(Potential::quadratic(), r).value == doctest::Approx(r * r).epsilon(1e-9));
    CHECK(convexity_gap(Potential::power(4), r).value == doctest::Approx(std::pow(r, 4)).epsilon(1e-9));
    CHECK(convexity_gap(Potential::power_plus_quadratic(3), r).value ==
          doctest::Approx(r * r + r * r * r).epsilon(1e-9));
    CHECK(convexity_gap(Potential::absolute(40), r).value == doctest::Approx(0.0));
    // |x|^1.5 has W = 0, approached as s -> infinity.
    CHECK(convexity_gap(Potential::power(1.5), r).value <= 1e-5 * r * r);
    CHECK(convexity_gap(Potential::power_plus_quadratic(4), -r).value >= r * r);
  }
  CHECK(convexity_gap(Potential::quadratic(), 0.0).value == 0.0);
}

TEST_CASE("small_ratio_set examples") {
  auto quad = small_ratio_set(Potential::quadratic(), 1.0, {-8, 8, 161});
  CHECK(quad.intervals.empty());
  CHECK(quad.mass == 0.0);

  auto abs = small_ratio_set(Potential::absolute(60), 1.0, {-40, 40, 801});
  REQUIRE(abs.intervals.size() == 2);
  // The t-grid starts at 1e-6, which resolves the excluded point 0 to that width.
  CHECK(std::abs(abs.intervals[0].hi) <= 2e-6);
  CHECK(std::abs(abs.intervals[1].lo) <= 2e-6);
  CHECK(abs.mass == doctest::Approx(1.0).epsilon(5e-6));

  auto quartic = small_ratio_set(Potential::power(4), 0.1, {-4, 4, 161});
  REQUIRE(quartic.intervals.size() == 1);
  double b = std::sqrt(0.1 / 12.0);
  CHECK(quartic.intervals[0].hi == doctest::Approx(b).epsilon(1e-7));
  CHECK(quartic.intervals[0].lo == doctest::Approx(-b).epsilon(1e-7));
  double oracle = simpson([](double s) { return std::exp(-s * s * s * s); }, 0, b, 2000);
  CHECK(quartic.mass == doctest::Approx(oracle).epsilon(1e-7));

  CHECK_THROWS_AS(small_ratio_set(Potential::quadratic(), 1.0, {-1, 1, 21}), GridError);
}

TEST_CASE("gibbs_tail_factor") {
  auto g = gibbs_tail_factor(Potential::quadratic(), {{0.0, kInf}}, 2);
  CHECK(g.integral == doctest::Approx(std::sqrt(std::acos(-1.0)) / 2).epsilon(1e-10));
  CHECK(g.exponent == doctest::Approx(1.0 / 8));
  CHECK_FALSE(g.constant.has_value());
  auto q = gibbs_tail_factor(Potential::power(4), {{2.0, kInf}}, 3);
  CHECK(q.exponent == doctest::Approx(1.0 / 24));
  double oracle = simpson([](double s) { return std::exp(-s * s * s * s); }, 2.0, 4.0, 20000);
  CHECK(q.integral == doctest::Approx(oracle).epsilon(1e-8));
  auto a = gibbs_tail_factor(Potential::absolute(30), {{-1.0, 2.0}}, 2);
  CHECK(a.integral == doctest::Approx(2 - std::exp(-1.0) - std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("symmetric difference is stable for small increments") {
  auto U = Potential::power(4);
  double s = 1.0, t = 1e-6;
  CHECK(U.symmetric_difference(s, t) == doctest::Approx(12 * t * t + 2 * t * t * t * t).epsilon(1e-8));
  auto P = Potential::power(2.5);
  double direct = std::pow(1.3, 2.5) + std::pow(0.7, 2.5) - 2.0;
  CHECK(P.symmetric_difference(1.0, 0.3) == doctest::Approx(direct).epsilon(1e-12));
}
