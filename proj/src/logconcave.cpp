#include "gradflux/logconcave.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradflux/error.hpp"
#include "numeric.hpp"

namespace gradflux {

double Grid1D::operator()(double s) const {
  const std::size_t N = values.size();
  if (N == 0) return 0.0;
  const double eps = 1e-12 * h;
  if (s < s_min - eps || s > s_max() + eps) return 0.0;
  if (N == 1) return values[0];
  double pos = std::clamp((s - s_min) / h, 0.0, static_cast<double>(N - 1));
  auto k = std::min(static_cast<std::size_t>(pos), N - 2);
  double w = pos - static_cast<double>(k);
  double a = values[k], b = values[k + 1];
  if (w == 0.0) return a;
  if (w == 1.0) return b;
  if (a > 0 && b > 0) return std::exp((1 - w) * std::log(a) + w * std::log(b));
  return (1 - w) * a + w * b;
}

namespace {

double trapezoid(const std::vector<double>& v, double h, std::size_t stride = 1,
                 std::size_t count = 0) {
  if (count == 0) count = v.size();
  if (count < 2) return 0.0;
  detail::KahanSum s;
  for (std::size_t k = 0; k + stride < count; k += stride) s.add(0.5 * (v[k] + v[k + stride]));
  return s.value() * h * static_cast<double>(stride);
}

}  // namespace

double Grid1D::integral() const { return trapezoid(values, h); }

double Grid1D::integral_error() const {
  std::size_t count = values.size() % 2 == 1 ? values.size() : values.size() - 1;
  if (count < 3) return 0.0;
  double fine = trapezoid(values, h, 1, count), coarse = trapezoid(values, h, 2, count);
  return std::abs(fine - coarse) / 3.0;
}

DensityGrid1D DensityGrid1D::from_log(const std::function<double(double)>& f, double lo, double hi,
                                      std::size_t points) {
  if (!(hi > lo) || points < 3) throw GridError("density grid needs hi > lo and >= 3 points");
  DensityGrid1D g;
  g.s_min = lo;
  g.h = (hi - lo) / static_cast<double>(points - 1);
  std::vector<double> fv(points);
  double fmin = kInf;
  for (std::size_t k = 0; k < points; ++k) {
    fv[k] = f(g.node(k));
    if (std::isnan(fv[k])) throw GridError("log-density evaluated to NaN");
    fmin = std::min(fmin, fv[k]);
  }
  if (!std::isfinite(fmin)) throw GridError("density vanishes on the whole grid");
  g.values.resize(points);
  for (std::size_t k = 0; k < points; ++k) g.values[k] = std::exp(-(fv[k] - fmin));
  double mass = g.integral();
  g.log_values.resize(points);
  for (std::size_t k = 0; k < points; ++k) {
    g.values[k] /= mass;
    g.log_values[k] = std::isfinite(fv[k]) ? -(fv[k] - fmin) - std::log(mass) : -kInf;
  }
  return g;
}

DensityGrid1D DensityGrid1D::from_values(double s_min, double h, std::vector<double> values) {
  if (!(h > 0) || values.size() < 2) throw GridError("density grid needs h > 0 and >= 2 points");
  DensityGrid1D g;
  g.s_min = s_min;
  g.h = h;
  g.values = std::move(values);
  for (double v : g.values)
    if (!(v >= 0) || !std::isfinite(v)) throw GridError("density values must be finite and >= 0");
  double mass = g.integral();
  if (!(mass > 0)) throw GridError("density has zero mass");
  g.log_values.resize(g.values.size());
  for (std::size_t k = 0; k < g.values.size(); ++k) {
    g.values[k] /= mass;
    g.log_values[k] = g.values[k] > 0 ? std::log(g.values[k]) : -kInf;
  }
  return g;
}

void DensityGrid1D::validate(double tol) const {
  if (log_values.size() != values.size()) throw GridError("log-values missing");
  for (double v : values)
    if (!(v >= 0) || !std::isfinite(v)) throw GridError("density values must be finite and >= 0");
  for (std::size_t k = 0; k < values.size(); ++k) {
    double from_log = std::isfinite(log_values[k]) ? std::exp(log_values[k]) : 0.0;
    if (std::abs(from_log - values[k]) > 1e-9 * std::max(values[k], 1e-300))
      throw GridError("log-values disagree with values");
  }
  if (std::abs(integral() - 1.0) > 1e-8) throw GridError("density is not normalised");
  std::size_t first = values.size(), last = 0;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] > 0) {
      first = std::min(first, k);
      last = k;
    }
  for (std::size_t k = first; k <= last; ++k)
    if (!(values[k] > 0)) throw GridError("density support is not an interval");
  for (std::size_t k = first + 1; k < last; ++k) {
    double excess = log_values[k - 1] + log_values[k + 1] - 2 * log_values[k];
    if (excess > tol) {
      std::ostringstream msg;
      msg << "log-concavity fails at s = " << node(k) << " by " << excess;
      throw GridError(msg.str());
    }
  }
}

DensityStats density_stats(const DensityGrid1D& alpha) {
  DensityStats st;
  const std::size_t N = alpha.size();
  std::vector<double> m1(N), m2(N);
  double mass = alpha.integral();
  for (std::size_t k = 0; k < N; ++k) {
    st.sup = std::max(st.sup, alpha.values[k]);
    m1[k] = alpha.node(k) * alpha.values[k];
  }
  st.mean = trapezoid(m1, alpha.h) / mass;
  for (std::size_t k = 0; k < N; ++k) {
    double d = alpha.node(k) - st.mean;
    m2[k] = d * d * alpha.values[k];
  }
  st.variance = trapezoid(m2, alpha.h) / mass;
  st.median = density_quantile(alpha, 0.5);
  return st;
}

double density_quantile(const DensityGrid1D& alpha, double q) {
  if (!(q >= 0 && q <= 1)) throw DomainError("quantile level must lie in [0,1]");
  const double mass = alpha.integral(), target = q * mass, h = alpha.h;
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < alpha.size(); ++k) {
    double a = alpha.values[k], b = alpha.values[k + 1];
    double cell = 0.5 * (a + b) * h;
    if (acc + cell >= target && cell > 0) {
      // Solve a w h + (b - a) w^2 h / 2 = need for w in [0,1].
      double need = (target - acc) / h;
      double w;
      if (std::abs(b - a) < 1e-14 * std::max(a, b))
        w = need / a;
      else
        w = (-a + std::sqrt(std::max(0.0, a * a + 2 * (b - a) * need))) / (b - a);
      return alpha.node(k) + std::clamp(w, 0.0, 1.0) * h;
    }
    acc += cell;
  }
  return alpha.s_max();
}

namespace {

double level_mass(const Grid1D& g, double p, bool strict) {
  auto below = [&](double v) { return strict ? v < p : v <= p; };
  detail::KahanSum s;
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    double a = g.values[k], b = g.values[k + 1];
    bool ia = below(a), ib = below(b);
    if (ia && ib) {
      s.add(0.5 * (a + b));
    } else if (ia != ib) {
      double w = (p - a) / (b - a);
      if (ia)
        s.add(w * 0.5 * (a + p));
      else
        s.add((1 - w) * 0.5 * (p + b));
    }
  }
  return s.value() * g.h;
}

double level_prob_impl(const DensityGrid1D& alpha, double p, bool strict) {
  return level_mass(alpha, p, strict) / alpha.integral();
}

DensityGrid1D even_subgrid(const DensityGrid1D& alpha) {
  std::vector<double> v;
  std::size_t count = alpha.size() % 2 == 1 ? alpha.size() : alpha.size() - 1;
  for (std::size_t k = 0; k < count; k += 2) v.push_back(alpha.values[k]);
  return DensityGrid1D::from_values(alpha.s_min, 2 * alpha.h, std::move(v));
}

}  // namespace

double level_prob(const DensityGrid1D& alpha, double p) { return level_prob_impl(alpha, p, false); }

Prop21Report check_prop21(const DensityGrid1D& alpha, std::size_t p_points) {
  Prop21Report r;
  auto st = density_stats(alpha);
  r.sup_times_sd = st.sup * std::sqrt(st.variance);
  // a0 = inf{a : Pr(alpha(xi) < a) > 1/4}.
  double a0 = detail::bisect_boundary(
      [&](double a) { return level_prob_impl(alpha, a, true) > 0.25; }, 0.0,
      st.sup * (1 + 1e-12) + 1e-300, 200);
  r.sup_over_a0 = st.sup / a0;

  auto coarse = even_subgrid(alpha);
  double coarse_sup = *std::max_element(coarse.values.begin(), coarse.values.end());
  r.tail.pass = true;
  double worst = -kInf;
  for (std::size_t j = 1; j <= p_points; ++j) {
    double p = st.sup * static_cast<double>(j) / static_cast<double>(p_points);
    double lhs = level_prob(alpha, p), rhs = p / st.sup;
    double lhs2 = level_prob(coarse, p * coarse_sup / st.sup);
    double tol = 10.0 * std::abs(lhs - lhs2) / 3.0 + 1e-12;
    double margin = lhs - rhs - tol;
    if (margin > worst) {
      worst = margin;
      r.tail.lhs = lhs;
      r.tail.rhs = rhs;
      r.tail.tolerance = tol;
      std::ostringstream d;
      d << "p = " << p;
      r.tail.detail = d.str();
    }
    if (margin > 0) r.tail.pass = false;
  }
  return r;
}

namespace {

// Mass where the second difference of -log alpha with stride m exceeds thr.
double curvature_tail_mass(const DensityGrid1D& alpha, std::size_t m, double thr, double& crossing) {
  const std::size_t N = alpha.size();
  const double hm = alpha.h * static_cast<double>(m);
  detail::KahanSum s;
  crossing = 0.0;
  int prev = -1;
  double prev_val = 0.0;
  for (std::size_t k = m; k + m < N; k += m) {
    const auto& L = alpha.log_values;
    if (!std::isfinite(L[k - m]) || !std::isfinite(L[k]) || !std::isfinite(L[k + m])) {
      prev = -1;
      continue;
    }
    double fpp = -(L[k + m] - 2 * L[k] + L[k - m]) / (hm * hm);
    int in = fpp > thr ? 1 : 0;
    if (in) s.add(alpha.values[k] * hm);
    if (prev >= 0 && prev != in) crossing += hm * std::max(prev_val, alpha.values[k]);
    prev = in;
    prev_val = alpha.values[k];
  }
  return s.value();
}

}  // namespace

CheckReport check_second_derivative_tail(const DensityGrid1D& alpha, double C) {
  if (!(C >= 4)) throw DomainError("the curvature tail bound needs C >= 4");
  double M = *std::max_element(alpha.values.begin(), alpha.values.end());
  double thr = (C * M) * (C * M);
  double cross1 = 0, cross2 = 0;
  double fine = curvature_tail_mass(alpha, 1, thr, cross1);
  double coarse = curvature_tail_mass(alpha, 2, thr, cross2);
  CheckReport r;
  r.lhs = fine;
  r.rhs = 4.0 / C;
  r.tolerance = 10.0 * std::max(std::abs(fine - coarse) / 3.0, cross1) + 1e-12;
  r.pass = r.lhs <= r.rhs + r.tolerance;
  std::ostringstream d;
  d << "threshold (C M)^2 = " << thr;
  r.detail = d.str();
  return r;
}

VarViaLogconcavity check_var_via_logconcavity(const DensityGrid1D& alpha, double t, double delta) {
  if (!(t > 0)) throw DomainError("t must be positive");
  if (!(delta > 0 && delta < 1)) throw DomainError("delta must lie in (0,1)");
  // Midpoint rule over cells; the comparison carries a relative slack.
  detail::KahanSum hit, total;
  for (std::size_t k = 0; k + 1 < alpha.size(); ++k) {
    double s = alpha.node(k) + 0.5 * alpha.h;
    double a = alpha(s);
    if (!(a > 0)) continue;
    total.add(a);
    double lhs = std::sqrt(alpha(s + t) * alpha(s - t));
    if (lhs <= (1 - delta) * a * (1 + 1e-9)) hit.add(a);
  }
  VarViaLogconcavity out;
  out.premise_probability = hit.value() / total.value();
  if (out.premise_probability < 0.5 - 1e-9) {
    std::ostringstream msg;
    msg << "premise probability " << out.premise_probability << " < 1/2";
    throw PremiseNotMet(msg.str());
  }
  out.ratio = std::sqrt(density_stats(alpha).variance) * delta / t;
  return out;
}

CheckReport prekopa_leindler_check(const Grid1D& F1, const Grid1D& F2, const Grid1D& F,
                                   double lambda) {
  if (!(lambda > 0 && lambda < 1)) throw DomainError("lambda must lie in (0,1)");
  for (const auto* g : {&F1, &F2, &F})
    for (double v : g->values)
      if (!(v >= 0) || !std::isfinite(v)) throw GridError("functions must be finite and >= 0");
  for (std::size_t i = 0; i < F1.size(); ++i) {
    if (F1.values[i] == 0) continue;
    for (std::size_t j = 0; j < F2.size(); ++j) {
      if (F2.values[j] == 0) continue;
      double x = F1.node(i), y = F2.node(j);
      double need = std::pow(F1.values[i], 1 - lambda) * std::pow(F2.values[j], lambda);
      double got = F((1 - lambda) * x + lambda * y);
      if (got < need * (1 - 1e-12)) {
        std::ostringstream msg;
        msg << "pointwise hypothesis fails at x = " << x << ", y = " << y << ": " << got << " < "
            << need;
        throw HypothesisFailed(msg.str());
      }
    }
  }
  double I1 = F1.integral(), I2 = F2.integral(), I = F.integral();
  CheckReport r;
  r.lhs = I;
  r.rhs = std::pow(I1, 1 - lambda) * std::pow(I2, lambda);
  double err = F.integral_error();
  if (I1 > 0) err += r.rhs * (1 - lambda) * F1.integral_error() / I1;
  if (I2 > 0) err += r.rhs * lambda * F2.integral_error() / I2;
  r.tolerance = 10.0 * err + 1e-12 * std::max(r.lhs, r.rhs);
  r.pass = r.lhs >= r.rhs - r.tolerance;
  r.detail = "integral of F against the weighted geometric mean";
  return r;
}

double hess_inverse_form(const Eigen::MatrixXd& H, const Eigen::VectorXd& n) {
  if (H.rows() != H.cols() || H.rows() != n.size()) throw DomainError("dimension mismatch");
  double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("Hessian form must be symmetric");
  double nn = n.norm();
  if (!(nn > 0)) throw DomainError("direction must be nonzero");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
  const auto& lam = es.eigenvalues();
  double trace = std::max(0.0, lam.sum());
  if (lam.minCoeff() < -1e-12 * std::max(1.0, trace)) throw DomainError("Hessian form is not PSD");
  double thr = 1e-10 * trace;
  double value = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    double c = es.eigenvectors().col(i).dot(n);
    if (lam[i] <= thr || trace == 0.0) {
      if (std::abs(c) > 1e-10 * nn) return kInf;
    } else {
      value += c * c / lam[i];
    }
  }
  return value;
}

}  // namespace gradflux
