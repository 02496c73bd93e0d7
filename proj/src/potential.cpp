#include "gradflux/potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gradflux/error.hpp"
#include "numeric.hpp"

namespace gradflux {

double GridSpec::node(std::size_t k) const {
  if (points < 2) return lo;
  return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
}

Potential Potential::quadratic() {
  Potential u;
  u.kind_ = Kind::quadratic;
  u.p_ = 2.0;
  u.integer_p_ = true;
  return u;
}

Potential Potential::power(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("power potential needs p > 1");
  Potential u;
  u.kind_ = Kind::power;
  u.p_ = p;
  u.integer_p_ = (p == std::floor(p) && p <= 16);
  return u;
}

Potential Potential::power_plus_quadratic(double p) {
  if (!(p > 2.0) || !std::isfinite(p))
    throw DomainError("power_plus_quadratic needs p > 2");
  Potential u = power(p);
  u.kind_ = Kind::power_plus_quadratic;
  return u;
}

Potential Potential::custom(std::vector<double> xs, std::vector<double> us) {
  const std::size_t n = xs.size();
  if (n < 3 || us.size() != n) throw DomainError("custom potential needs >= 3 table rows");
  double dx = (xs.back() - xs.front()) / static_cast<double>(n - 1);
  if (!(dx > 0)) throw DomainError("custom potential grid must be increasing");
  double scale = 0.0;
  for (double v : us) {
    if (!std::isfinite(v)) throw DomainError("custom potential values must be finite");
    scale = std::max(scale, std::abs(v));
  }
  scale = std::max(scale, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    double expect = xs.front() + dx * static_cast<double>(k);
    if (std::abs(xs[k] - expect) > 1e-9 * std::max(1.0, std::abs(expect)))
      throw DomainError("custom potential grid must be uniform");
  }
  if (std::abs(xs.front() + xs.back()) > 1e-9 * std::abs(xs.back()))
    throw DomainError("custom potential grid must be symmetric about 0");
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(us[k] - us[n - 1 - k]) > 1e-9 * scale)
      throw DomainError("custom potential is not even");
  for (std::size_t k = 1; k + 1 < n; ++k)
    if (us[k - 1] + us[k + 1] - 2 * us[k] < -1e-9 * scale)
      throw DomainError("custom potential is not convex");
  Potential u;
  u.kind_ = Kind::custom;
  u.p_ = std::nan("");
  u.half_width_ = xs.back();
  u.x0_ = xs.front();
  u.dx_ = dx;
  u.xs_ = std::move(xs);
  u.us_ = std::move(us);
  return u;
}

Potential Potential::absolute(double half_width) {
  const std::size_t half = 240;
  std::vector<double> xs, us;
  for (std::size_t k = 0; k <= 2 * half; ++k) {
    double x = half_width * (static_cast<double>(k) - static_cast<double>(half)) /
               static_cast<double>(half);
    xs.push_back(x);
    us.push_back(std::abs(x));
  }
  return custom(std::move(xs), std::move(us));
}

Potential Potential::with_tolerance(double tol) const {
  if (!(tol > 0)) throw DomainError("tolerance must be positive");
  Potential u = *this;
  u.tolerance_ = tol;
  return u;
}

std::string Potential::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::quadratic: os << "quadratic"; break;
    case Kind::power: os << "power(p=" << p_ << ")"; break;
    case Kind::power_plus_quadratic: os << "power_plus_quadratic(p=" << p_ << ")"; break;
    case Kind::custom: os << "custom(n=" << xs_.size() << ",half_width=" << half_width_ << ")"; break;
  }
  return os.str();
}

double Potential::power_part(double x) const {
  double a = std::abs(x);
  if (integer_p_) return detail::ipow(a, static_cast<int>(p_));
  return std::pow(a, p_);
}

double Potential::table_eval(double x) const {
  if (!(std::abs(x) <= half_width_)) return kInf;
  double pos = (x - x0_) / dx_;
  auto k = static_cast<std::ptrdiff_t>(std::floor(pos));
  k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(xs_.size()) - 2);
  double w = pos - static_cast<double>(k);
  return us_[k] + w * (us_[k + 1] - us_[k]);
}

double Potential::table_slope(double x) const {
  if (x < -half_width_) throw DomainError("derivative outside the potential domain");
  if (x >= half_width_) return kInf;
  double pos = (x - x0_) / dx_;
  auto k = static_cast<std::ptrdiff_t>(std::floor(pos));
  k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(xs_.size()) - 2);
  return (us_[k + 1] - us_[k]) / dx_;
}

double Potential::operator()(double x) const {
  switch (kind_) {
    case Kind::quadratic: return x * x;
    case Kind::power: return power_part(x);
    case Kind::power_plus_quadratic: return power_part(x) + x * x;
    case Kind::custom: return table_eval(x);
  }
  return kInf;
}

double Potential::derivative(double x) const {
  auto dpow = [&](double y) {
    if (y == 0.0) return 0.0;
    double a = std::abs(y);
    double g = integer_p_ ? detail::ipow(a, static_cast<int>(p_) - 1) : std::pow(a, p_ - 1.0);
    return std::copysign(p_ * g, y);
  };
  switch (kind_) {
    case Kind::quadratic: return 2 * x;
    case Kind::power: return dpow(x);
    case Kind::power_plus_quadratic: return dpow(x) + 2 * x;
    case Kind::custom: return table_slope(x);
  }
  return 0.0;
}

double Potential::second_derivative(double x) const {
  if (!in_domain(x)) throw DomainError("second derivative outside the potential domain");
  auto d2pow = [&](double y) {
    if (y == 0.0) {
      if (p_ < 2.0) return kInf;
      return p_ == 2.0 ? 2.0 : 0.0;
    }
    return p_ * (p_ - 1.0) * std::pow(std::abs(y), p_ - 2.0);
  };
  switch (kind_) {
    case Kind::quadratic: return 2.0;
    case Kind::power: return d2pow(x);
    case Kind::power_plus_quadratic: return d2pow(x) + 2.0;
    case Kind::custom: {
      double h = dx_;
      double c = x;
      if (c + h > half_width_) c = half_width_ - h;
      if (c - h < -half_width_) c = -half_width_ + h;
      return (table_eval(c + h) + table_eval(c - h) - 2 * table_eval(c)) / (h * h);
    }
  }
  return 0.0;
}

double Potential::symmetric_difference(double s, double t) const {
  t = std::abs(t);
  if (!in_domain(s + t) || !in_domain(s - t) || !in_domain(s)) return kInf;
  auto power_sd = [&]() {
    double a = std::abs(s);
    if (a == 0.0) return 2.0 * power_part(t);
    if (t < a) {
      double x = t / a;
      double v = power_part(a) * (std::expm1(p_ * std::log1p(x)) + std::expm1(p_ * std::log1p(-x)));
      return std::max(0.0, v);
    }
    return std::max(0.0, power_part(a + t) + power_part(a - t) - 2.0 * power_part(a));
  };
  switch (kind_) {
    case Kind::quadratic: return 2 * t * t;
    case Kind::power: return power_sd();
    case Kind::power_plus_quadratic: return power_sd() + 2 * t * t;
    case Kind::custom:
      return std::max(0.0, table_eval(s + t) + table_eval(s - t) - 2 * table_eval(s));
  }
  return kInf;
}

Minimum second_order_ratio(const Potential& U, double s) {
  if (!U.in_domain(s)) throw DomainError("second_order_ratio: s outside the domain");
  auto ratio = [&](double t) {
    double num = U.symmetric_difference(s, t);
    return num / std::min(t * t, 1.0);
  };
  const double t_lo = 1e-6, t_hi = 1e3;
  const std::size_t K = 271;  // 30 points per decade
  const double step = std::log(t_hi / t_lo) / static_cast<double>(K - 1);
  std::size_t best = 0;
  double best_val = kInf;
  for (std::size_t k = 0; k < K; ++k) {
    double v = ratio(t_lo * std::exp(step * static_cast<double>(k)));
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  if (!std::isfinite(best_val)) return {kInf, t_lo};
  double a = std::log(t_lo) + step * static_cast<double>(best == 0 ? 0 : best - 1);
  double b = std::log(t_lo) + step * static_cast<double>(std::min(best + 1, K - 1));
  auto refined = detail::minimize_on([&](double lt) { return ratio(std::exp(lt)); }, a, b, 40);
  double tb = t_lo * std::exp(step * static_cast<double>(best));
  if (refined.value < best_val) return {refined.value, std::exp(refined.argmin)};
  return {best_val, tb};
}

Minimum convexity_gap(const Potential& U, double r) {
  r = std::abs(r);
  if (r == 0.0) return {0.0, 0.0};
  double cap = std::isfinite(U.half_width()) ? U.half_width() - r : 1e12;
  if (cap < 0) return {kInf, 0.0};
  auto h = [&](double s) { return 0.5 * U.symmetric_difference(s, r); };
  const std::size_t K = 201;
  double s_max = std::min(cap, std::max(1.0, 4 * r));
  for (;;) {
    std::size_t best = 0;
    double best_val = kInf;
    double ds = s_max / static_cast<double>(K - 1);
    for (std::size_t k = 0; k < K; ++k) {
      double v = h(ds * static_cast<double>(k));
      if (v < best_val) {
        best_val = v;
        best = k;
      }
    }
    // Still decreasing at the right end: widen the window by a decade.
    if (best == K - 1 && s_max < cap) {
      s_max = std::min(cap, 10 * s_max);
      continue;
    }
    double a = ds * static_cast<double>(best == 0 ? 0 : best - 1);
    double b = ds * static_cast<double>(std::min(best + 1, K - 1));
    auto refined = detail::minimize_on(h, a, b, 52);
    if (refined.value < best_val) return refined;
    return {best_val, ds * static_cast<double>(best)};
  }
}

namespace {

double tail_mass_beyond(const Potential& U, double x) {
  if (x >= U.half_width()) return 0.0;
  double slope = U.derivative(x);
  if (!(slope > 0)) return kInf;
  return std::exp(-U(x)) / slope;
}

}  // namespace

double gibbs_integral(const Potential& U, double lo, double hi) {
  lo = std::max(lo, -U.half_width());
  hi = std::min(hi, U.half_width());
  if (!(hi > lo)) return 0.0;
  if (U.kind() == Potential::Kind::custom) {
    // Exact integral of exp(-U) for piecewise-linear U.
    const auto& xs = U.table_x();
    double dx = xs[1] - xs[0];
    auto seg = [&](double a, double b) {
      double ua = U(a), ub = U(b);
      double d = ub - ua;
      double w = b - a;
      if (std::abs(d) < 1e-14) return w * std::exp(-0.5 * (ua + ub));
      return std::exp(-ua) * w * (-std::expm1(-d)) / d;
    };
    double total = 0.0;
    double a = lo;
    while (a < hi) {
      double k = std::floor((a - xs.front()) / dx + 1e-12);
      double next = std::min(hi, xs.front() + (k + 1) * dx);
      if (next <= a) next = std::min(hi, a + dx);
      total += seg(a, next);
      a = next;
    }
    return total;
  }
  auto f = [&](double x) { return std::exp(-U(x)); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto piece = [&](double a, double b) {
    double err = 0.0;
    return GK::integrate(f, a, b, 15, 1e-13, &err);
  };
  if (lo < 0.0 && hi > 0.0) return piece(lo, 0.0) + piece(0.0, hi);
  return piece(lo, hi);
}

SmallRatioSet small_ratio_set(const Potential& U, double delta, const GridSpec& g) {
  if (g.points < 2 || !(g.hi > g.lo)) throw GridError("small_ratio_set: degenerate grid");
  double cover = std::min(std::abs(g.lo), std::abs(g.hi));
  if (g.lo > 0 || g.hi < 0) cover = 0;
  if (tail_mass_beyond(U, cover) > U.eval_tolerance())
    throw GridError("small_ratio_set: grid does not cover the Gibbs mass");
  auto in_set = [&](double s) {
    return U.in_domain(s) && second_order_ratio(U, s).value < delta;
  };
  SmallRatioSet out;
  bool open = false;
  double start = 0.0;
  bool prev = false;
  double prev_s = g.lo;
  for (std::size_t k = 0; k < g.points; ++k) {
    double s = g.node(k);
    bool cur = in_set(s);
    if (k == 0) {
      if (cur) {
        open = true;
        start = s;
      }
    } else if (cur != prev) {
      double b = detail::bisect_boundary(in_set, prev_s, s);
      if (cur) {
        open = true;
        start = b;
      } else {
        out.intervals.push_back({start, b});
        open = false;
      }
    }
    prev = cur;
    prev_s = s;
  }
  if (open) out.intervals.push_back({start, g.hi});
  for (const auto& iv : out.intervals)
    if (iv.hi > 0) out.mass += gibbs_integral(U, std::max(0.0, iv.lo), iv.hi);
  return out;
}

GibbsTailFactor gibbs_tail_factor(const Potential& U, const IntervalUnion& S, int d) {
  if (d < 1) throw DomainError("gibbs_tail_factor: dimension must be positive");
  double total = 0.0;
  for (const auto& iv : S) total += gibbs_integral(U, iv.lo, iv.hi);
  double exponent = 1.0 / (2.0 * d * std::ldexp(1.0, d - 1));
  return {total, exponent, std::nullopt};
}

ConvexityProfile convexity_profile(const Potential& U, const GridSpec& s_grid,
                                   const GridSpec& r_grid) {
  ConvexityProfile out;
  for (std::size_t k = 0; k < s_grid.points; ++k) {
    double s = s_grid.node(k);
    if (!U.in_domain(s)) continue;
    out.s.push_back(s);
    out.second_derivative.push_back(U.second_derivative(s));
    out.ratio.push_back(second_order_ratio(U, s).value);
  }
  for (std::size_t k = 0; k < r_grid.points; ++k) {
    double r = r_grid.node(k);
    out.r.push_back(r);
    out.gap.push_back(convexity_gap(U, r).value);
  }
  return out;
}

}  // namespace gradflux
