#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gradflux {

/// Nonnegative function tabulated on a uniform grid s_min + k h.
///
/// Off-grid values use log-linear interpolation between neighbouring nodes
/// (linear where a node vanishes) and are 0 outside [s_min, s_max].
struct Grid1D {
  double s_min = 0.0;
  double h = 1.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double s_max() const { return s_min + h * static_cast<double>(values.size() - 1); }
  double node(std::size_t k) const { return s_min + h * static_cast<double>(k); }
  double operator()(double s) const;
  double integral() const;  // trapezoid
  // Trapezoid error estimate from the sub-grid of even nodes.
  double integral_error() const;
};

/// Normalised one-dimensional density on a grid.
struct DensityGrid1D : Grid1D {
  std::vector<double> log_values;  // -inf where the density vanishes

  // Tabulates exp(-f) on [lo, hi] and normalises by the trapezoid mass.
  static DensityGrid1D from_log(const std::function<double(double)>& f, double lo, double hi,
                                std::size_t points);
  static DensityGrid1D from_values(double s_min, double h, std::vector<double> values);
  // Throws GridError on negative values, bad normalisation or a failure of
  // midpoint log-concavity beyond `tol`.
  void validate(double tol = 1e-9) const;
};

struct DensityStats {
  double sup = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double median = 0.0;
};
DensityStats density_stats(const DensityGrid1D& alpha);
double density_quantile(const DensityGrid1D& alpha, double q);
// Pr(alpha(xi) <= p), exact for the piecewise-linear interpolant.
double level_prob(const DensityGrid1D& alpha, double p);

struct CheckReport {
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct Prop21Report {
  double sup_times_sd = 0.0;  // item 1
  double sup_over_a0 = 0.0;   // item 2
  CheckReport tail;           // item 3, worst p on the grid
};
Prop21Report check_prop21(const DensityGrid1D& alpha, std::size_t p_points = 64);

// Pr(f''(xi) > (C M)^2) <= 4 / C with f = -log alpha.
CheckReport check_second_derivative_tail(const DensityGrid1D& alpha, double C);

// sqrt(Var) delta / t after verifying the one-dimensional premise; throws
// PremiseNotMet when its probability is below 1/2.
struct VarViaLogconcavity {
  double ratio = 0.0;
  double premise_probability = 0.0;
};
VarViaLogconcavity check_var_via_logconcavity(const DensityGrid1D& alpha, double t, double delta);

// Verifies the pointwise hypothesis on the grid product (HypothesisFailed
// with the witness otherwise) and checks the integral inequality.
CheckReport prekopa_leindler_check(const Grid1D& F1, const Grid1D& F2, const Grid1D& F,
                                   double lambda);

// <n, H^{-1} n> through the variational principle; +inf when n has a
// component in ker H.
double hess_inverse_form(const Eigen::MatrixXd& H, const Eigen::VectorXd& n);

/// Density exp(-f) on R^n, n <= 3, with an integration box.
///
/// In support mode f is +inf outside the box. Otherwise the box is a
/// truncation window outside which the density is below 1e-14 of its peak.
class LogConcaveDensity {
 public:
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;

  // f = x^T A x / 2 + b.x + sum_i c_i x_i^4, optionally restricted to a box.
  static LogConcaveDensity polynomial(Mat A, Vec b, Vec c, std::optional<std::pair<Vec, Vec>> box = {});
  static LogConcaveDensity gaussian(const Mat& precision);
  static LogConcaveDensity standard_gaussian(int n);
  static LogConcaveDensity quartic(int n);
  static LogConcaveDensity uniform_box(const Vec& lo, const Vec& hi);
  // Derivatives by finite differences.
  static LogConcaveDensity custom(int n, std::function<double(const Vec&)> f, Vec lo, Vec hi,
                                  bool box_is_support);
  // f tabulated on a grid and multilinearly interpolated; support mode.
  static LogConcaveDensity tabulated(Vec lo, Vec step, std::vector<std::size_t> counts,
                                     std::vector<double> f_values);

  int dim() const { return n_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  bool box_is_support() const { return support_; }
  bool has_analytic_derivatives() const { return analytic_; }
  std::string describe() const { return label_; }

  double f(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  bool in_box(const Vec& x, double slack = 0.0) const;
  double log_normalizer() const;

  const std::vector<std::size_t>& grid_counts() const { return counts_; }
  const std::vector<double>& grid_values() const { return table_; }
  const Vec& grid_step() const { return step_; }
  bool is_tabulated() const { return !table_.empty(); }

 private:
  LogConcaveDensity() = default;
  void fit_truncation_box();

  int n_ = 1;
  Vec lo_, hi_;
  bool support_ = false;
  bool analytic_ = false;
  std::string label_;
  Mat A_;
  Vec b_, c_;
  std::function<double(const Vec&)> custom_;
  Vec step_;
  std::vector<std::size_t> counts_;
  std::vector<double> table_;
  mutable std::optional<double> log_z_;
};

struct SliceIntegral {
  double value = 0.0;
  double error = 0.0;
};

// Integral of weight(x) exp(-f(x)) over {<u,x> = r} for unit u; trapezoid
// with Richardson extrapolation. `resolution` is the per-axis cell count.
SliceIntegral slice_integral(const LogConcaveDensity& rho, const Eigen::VectorXd& u, double r,
                             std::size_t resolution,
                             const std::function<double(const Eigen::VectorXd&)>& weight = {});

// Density of <eta/|eta|, X>; QuadratureError when a slice misses 1e-6.
DensityGrid1D marginal_density(const LogConcaveDensity& rho, const Eigen::VectorXd& eta,
                               std::size_t points = 801);

struct CurvatureValue {
  double value = 0.0;
  Eigen::VectorXd witness;  // x+
};
// inf over <eta, x+> = <eta, x> + t of (f(x+) + f(2x - x+)) / 2 - f(x).
CurvatureValue d_curvature(const LogConcaveDensity& rho, const Eigen::VectorXd& eta,
                           const Eigen::VectorXd& x, double t);

// inf over <n, x+-> = s +- gamma of f(x+) + f(x-) - 2 f(x).
double one_point_convexity(const LogConcaveDensity& rho, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& n, double gamma);

struct GammaEta {
  double value = 0.0;
  double error = 0.0;
};
GammaEta gamma_eta(const LogConcaveDensity& rho, const Eigen::VectorXd& eta, double D, double s,
                   double t, std::size_t resolution = 64);

// sqrt(alpha(s-t) alpha(s+t)) <= (1 - gamma (1 - e^{-D})) alpha(s), both
// sides divided by alpha(s).
CheckReport check_quantitative_logconcavity(const LogConcaveDensity& rho,
                                            const Eigen::VectorXd& eta, double s, double t,
                                            double D, std::size_t resolution = 64);

// sup alpha >= p^{3/2} / ((8 - 4p) sqrt(2t)), p = Pr(<n, Hess^{-1} n> <= t).
CheckReport check_lemma_app_main(const LogConcaveDensity& rho, const Eigen::VectorXd& n, double t,
                                 std::size_t points = 401);

// -(log alpha)''(s) against the slice average of 1 / <n, Hess^{-1} n>.
CheckReport check_marginal_curvature(const LogConcaveDensity& rho, const Eigen::VectorXd& n,
                                     double s, double h = 1e-2, std::size_t resolution = 256);

}  // namespace gradflux
