#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gradflux {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo;
  double hi;
};
using IntervalUnion = std::vector<Interval>;

// Uniform grid of `points` nodes on [lo, hi].
struct GridSpec {
  double lo;
  double hi;
  std::size_t points;
  double node(std::size_t k) const;
};

// Value of an infimum together with the point that realizes it.
struct Minimum {
  double value;
  double argmin;
};

/// Even convex nearest-neighbour potential U.
///
/// Built-in families are closed form; custom potentials are tabulated on a
/// uniform symmetric grid, linearly interpolated, and +inf outside the table.
class Potential {
 public:
  enum class Kind { quadratic, power, power_plus_quadratic, custom };

  static Potential quadratic();
  static Potential power(double p);
  static Potential power_plus_quadratic(double p);
  static Potential custom(std::vector<double> xs, std::vector<double> values);
  // |x| tabulated on [-half_width, half_width].
  static Potential absolute(double half_width = 60.0);

  Kind kind() const { return kind_; }
  double exponent() const { return p_; }
  double half_width() const { return half_width_; }
  double eval_tolerance() const { return tolerance_; }
  Potential with_tolerance(double tol) const;
  const std::vector<double>& table_x() const { return xs_; }
  const std::vector<double>& table_u() const { return us_; }
  std::string describe() const;

  bool in_domain(double x) const { return std::abs(x) <= half_width_; }
  double operator()(double x) const;
  double eval(double x) const { return (*this)(x); }
  // Right derivative.
  double derivative(double x) const;
  double second_derivative(double x) const;
  // U(s+t) + U(s-t) - 2U(s), clamped at 0, evaluated without cancellation
  // for the closed-form families.
  double symmetric_difference(double s, double t) const;

 private:
  Potential() = default;
  double power_part(double x) const;
  double table_eval(double x) const;
  double table_slope(double x) const;

  Kind kind_ = Kind::quadratic;
  double p_ = 2.0;
  double half_width_ = kInf;
  double tolerance_ = 1e-10;
  bool integer_p_ = false;
  std::vector<double> xs_;
  std::vector<double> us_;
  double x0_ = 0.0;
  double dx_ = 0.0;
};

// delta_U(s) = inf_{t>0} (U(s+t)+U(s-t)-2U(s)) / min(t^2, 1).
Minimum second_order_ratio(const Potential& U, double s);

// W(r) = inf_s (U(s+r)+U(s-r))/2 - U(s).
Minimum convexity_gap(const Potential& U, double r);

struct SmallRatioSet {
  IntervalUnion intervals;
  double mass = 0.0;  // integral of exp(-U) over the set intersected with [0, inf)
};
SmallRatioSet small_ratio_set(const Potential& U, double delta, const GridSpec& s_grid);

struct GibbsTailFactor {
  double integral;
  double exponent;
  std::optional<double> constant;  // not known explicitly
};
GibbsTailFactor gibbs_tail_factor(const Potential& U, const IntervalUnion& S, int d);

// Integral of exp(-U) over [lo, hi]; hi may be +inf.
double gibbs_integral(const Potential& U, double lo, double hi);

struct ConvexityProfile {
  std::vector<double> s;
  std::vector<double> second_derivative;
  std::vector<double> ratio;
  std::vector<double> r;
  std::vector<double> gap;
};
ConvexityProfile convexity_profile(const Potential& U, const GridSpec& s_grid,
                                   const GridSpec& r_grid);

}  // namespace gradflux
