#include <algorithm>
#include <array>
#include <optional>
#include <cmath>
#include <sstream>

#include "gradflux/error.hpp"
#include "gradflux/logconcave.hpp"
#include "numeric.hpp"

namespace gradflux {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

// Density below 1e-14 of its peak outside the truncation box.
const double kTruncationLevel = 14.0 * std::log(10.0);

// Columns complete the unit vector u to an orthonormal basis.
Mat orthonormal_complement(const Vec& u) {
  const auto n = u.size();
  if (n == 1) return Mat(1, 0);
  Eigen::HouseholderQR<Mat> qr{Mat(u)};
  Mat Q = qr.householderQ() * Mat::Identity(n, n);
  return Q.rightCols(n - 1);
}

// {a : lo <= o + a b <= hi}; empty when lo > hi on return.
Interval feasible_interval(const Vec& o, const Vec& b, const Vec& lo, const Vec& hi) {
  Interval I{-kInf, kInf};
  for (Eigen::Index i = 0; i < o.size(); ++i) {
    if (std::abs(b[i]) < 1e-14) {
      double tol = 1e-12 * (1 + std::abs(o[i]));
      if (o[i] < lo[i] - tol || o[i] > hi[i] + tol) return {1.0, 0.0};
      continue;
    }
    double a0 = (lo[i] - o[i]) / b[i], a1 = (hi[i] - o[i]) / b[i];
    if (a0 > a1) std::swap(a0, a1);
    I.lo = std::max(I.lo, a0);
    I.hi = std::min(I.hi, a1);
  }
  return I;
}

// Range of the first slice coordinate over {lo <= o + B a <= hi}, a in R^2.
Interval polygon_extent(const Vec& o, const Mat& B, const Vec& lo, const Vec& hi) {
  double R = 4.0 * ((hi - lo).norm() + o.norm() + 1.0);
  std::vector<std::array<double, 2>> poly{{-R, -R}, {R, -R}, {R, R}, {-R, R}};
  auto clip = [&](double p0, double p1, double c) {  // keep p.a <= c
    std::vector<std::array<double, 2>> out;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      auto P = poly[k], Q = poly[(k + 1) % poly.size()];
      double fp = p0 * P[0] + p1 * P[1] - c, fq = p0 * Q[0] + p1 * Q[1] - c;
      if (fp <= 0) out.push_back(P);
      if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) {
        double w = fp / (fp - fq);
        out.push_back({P[0] + w * (Q[0] - P[0]), P[1] + w * (Q[1] - P[1])});
      }
    }
    poly = std::move(out);
  };
  for (Eigen::Index i = 0; i < o.size() && !poly.empty(); ++i) {
    clip(B(i, 0), B(i, 1), hi[i] - o[i]);
    if (!poly.empty()) clip(-B(i, 0), -B(i, 1), o[i] - lo[i]);
  }
  if (poly.empty()) return {1.0, 0.0};
  Interval I{kInf, -kInf};
  for (const auto& P : poly) {
    I.lo = std::min(I.lo, P[0]);
    I.hi = std::max(I.hi, P[0]);
  }
  return I;
}

struct Box {
  Vec lo, hi;
};

struct AffineMin {
  Vec a;
  double value = kInf;
};

// Minimises a convex F over x = o + B a (B with at most two columns),
// restricted to `box` when given. Nested Brent searches.
AffineMin minimize_affine(const std::function<double(const Vec&)>& F, const Vec& o, const Mat& B,
                          const std::optional<Box>& box, double scale) {
  const auto k = B.cols();
  AffineMin out;
  out.a = Vec::Zero(k);
  if (k == 0) {
    if (box && ((o - box->lo).minCoeff() < -1e-12 || (box->hi - o).minCoeff() < -1e-12)) return out;
    out.value = F(o);
    return out;
  }
  auto line = [&](const Vec& base, const Vec& dir, double& arg) -> double {
    if (box) {
      Interval I = feasible_interval(base, dir, box->lo, box->hi);
      if (I.lo > I.hi + 1e-12 * (1 + std::abs(I.hi))) {
        arg = 0.0;
        return kInf;
      }
      if (I.lo > I.hi) I.lo = I.hi;
      auto m = detail::minimize_on([&](double a) { return F(base + a * dir); }, I.lo, I.hi);
      arg = m.argmin;
      return m.value;
    }
    auto m = detail::line_minimize([&](double a) { return F(base + a * dir); }, scale);
    arg = m.argmin;
    return m.value;
  };
  if (k == 1) {
    double a;
    out.value = line(o, B.col(0), a);
    out.a[0] = a;
    return out;
  }
  auto inner = [&](double a1, double& a2) { return line(o + a1 * B.col(0), B.col(1), a2); };
  double a2 = 0.0;
  Minimum m;
  if (box) {
    Interval I = polygon_extent(o, B, box->lo, box->hi);
    if (I.lo > I.hi) return out;
    m = detail::minimize_on([&](double a1) { return inner(a1, a2); }, I.lo, I.hi);
  } else {
    m = detail::line_minimize([&](double a1) { return inner(a1, a2); }, scale);
  }
  out.value = inner(m.argmin, a2);
  out.a << m.argmin, a2;
  return out;
}

}  // namespace

LogConcaveDensity LogConcaveDensity::polynomial(Mat A, Vec b, Vec c,
                                                std::optional<std::pair<Vec, Vec>> box) {
  const auto n = A.rows();
  if (n < 1 || n > 3) throw DomainError("densities are supported for n <= 3");
  if (A.cols() != n || b.size() != n || c.size() != n) throw DomainError("dimension mismatch");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
    throw DomainError("quadratic part must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  if (es.eigenvalues().minCoeff() < -1e-12) throw DomainError("quadratic part must be PSD");
  if (c.minCoeff() < 0) throw DomainError("quartic coefficients must be >= 0");
  LogConcaveDensity d;
  d.n_ = static_cast<int>(n);
  d.A_ = std::move(A);
  d.b_ = std::move(b);
  d.c_ = std::move(c);
  d.analytic_ = true;
  std::ostringstream label;
  label << "polynomial(n=" << n << ")";
  d.label_ = label.str();
  if (box) {
    d.lo_ = box->first;
    d.hi_ = box->second;
    if (d.lo_.size() != n || d.hi_.size() != n || (d.hi_ - d.lo_).minCoeff() <= 0)
      throw DomainError("support box must satisfy lo < hi");
    d.support_ = true;
  } else {
    d.fit_truncation_box();
  }
  return d;
}

LogConcaveDensity LogConcaveDensity::gaussian(const Mat& precision) {
  const auto n = precision.rows();
  auto d = polynomial(precision, Vec::Zero(n), Vec::Zero(n));
  d.label_ = "gaussian(n=" + std::to_string(n) + ")";
  return d;
}

LogConcaveDensity LogConcaveDensity::standard_gaussian(int n) { return gaussian(Mat::Identity(n, n)); }

LogConcaveDensity LogConcaveDensity::quartic(int n) {
  auto d = polynomial(Mat::Zero(n, n), Vec::Zero(n), Vec::Ones(n));
  d.label_ = "quartic(n=" + std::to_string(n) + ")";
  return d;
}

LogConcaveDensity LogConcaveDensity::uniform_box(const Vec& lo, const Vec& hi) {
  const auto n = lo.size();
  auto d = polynomial(Mat::Zero(n, n), Vec::Zero(n), Vec::Zero(n), std::make_pair(lo, hi));
  d.label_ = "uniform(n=" + std::to_string(n) + ")";
  return d;
}

LogConcaveDensity LogConcaveDensity::custom(int n, std::function<double(const Vec&)> f, Vec lo,
                                            Vec hi, bool box_is_support) {
  if (n < 1 || n > 3) throw DomainError("densities are supported for n <= 3");
  if (lo.size() != n || hi.size() != n || (hi - lo).minCoeff() <= 0)
    throw DomainError("box must satisfy lo < hi");
  LogConcaveDensity d;
  d.n_ = n;
  d.custom_ = std::move(f);
  d.lo_ = std::move(lo);
  d.hi_ = std::move(hi);
  d.support_ = box_is_support;
  d.label_ = "custom(n=" + std::to_string(n) + ")";
  return d;
}

LogConcaveDensity LogConcaveDensity::tabulated(Vec lo, Vec step, std::vector<std::size_t> counts,
                                               std::vector<double> f_values) {
  const auto n = lo.size();
  if (n < 1 || n > 3 || step.size() != n || counts.size() != static_cast<std::size_t>(n))
    throw DomainError("tabulated density needs matching lo, step and counts with n <= 3");
  std::size_t total = 1;
  for (auto c : counts) {
    if (c < 2) throw GridError("each axis needs >= 2 nodes");
    total *= c;
  }
  if (f_values.size() != total) throw GridError("value count does not match the grid");
  if (step.minCoeff() <= 0) throw GridError("grid steps must be positive");
  LogConcaveDensity d;
  d.n_ = static_cast<int>(n);
  d.lo_ = lo;
  d.hi_ = lo;
  for (Eigen::Index i = 0; i < n; ++i) d.hi_[i] += step[i] * static_cast<double>(counts[i] - 1);
  d.step_ = std::move(step);
  d.counts_ = std::move(counts);
  d.table_ = std::move(f_values);
  d.support_ = true;
  d.label_ = "tabulated(n=" + std::to_string(n) + ")";
  return d;
}

bool LogConcaveDensity::in_box(const Vec& x, double slack) const {
  for (int i = 0; i < n_; ++i) {
    double tol = slack + 1e-12 * (1 + std::abs(x[i]));
    if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
  }
  return true;
}

double LogConcaveDensity::f(const Vec& x) const {
  if (support_ && !in_box(x)) return kInf;
  if (!table_.empty()) {
    // Multilinear interpolation; row-major with the last axis fastest.
    std::array<std::size_t, 3> base{};
    std::array<double, 3> w{};
    for (int i = 0; i < n_; ++i) {
      double pos = std::clamp((x[i] - lo_[i]) / step_[i], 0.0, static_cast<double>(counts_[i] - 1));
      base[i] = std::min(static_cast<std::size_t>(pos), counts_[i] - 2);
      w[i] = pos - static_cast<double>(base[i]);
    }
    double acc = 0.0;
    for (int corner = 0; corner < (1 << n_); ++corner) {
      double weight = 1.0;
      std::size_t idx = 0;
      for (int i = 0; i < n_; ++i) {
        int bit = (corner >> i) & 1;
        weight *= bit ? w[i] : 1 - w[i];
        idx = idx * counts_[i] + base[i] + static_cast<std::size_t>(bit);
      }
      if (weight == 0.0) continue;
      double v = table_[idx];
      if (std::isinf(v)) return kInf;
      acc += weight * v;
    }
    return acc;
  }
  if (custom_) return custom_(x);
  double v = 0.5 * x.dot(A_ * x) + b_.dot(x);
  for (int i = 0; i < n_; ++i) v += c_[i] * detail::ipow(x[i], 4);
  return v;
}

Vec LogConcaveDensity::gradient(const Vec& x) const {
  if (analytic_) {
    Vec g = A_ * x + b_;
    for (int i = 0; i < n_; ++i) g[i] += 4 * c_[i] * detail::ipow(x[i], 3);
    return g;
  }
  Vec g(n_);
  for (int i = 0; i < n_; ++i) {
    double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

Mat LogConcaveDensity::hessian(const Vec& x) const {
  if (analytic_) {
    Mat H = A_;
    for (int i = 0; i < n_; ++i) H(i, i) += 12 * c_[i] * x[i] * x[i];
    return H;
  }
  Mat H(n_, n_);
  const double f0 = f(x);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      double hi = 1e-4 * std::max(1.0, std::abs(x[i])), hj = 1e-4 * std::max(1.0, std::abs(x[j]));
      if (i == j) {
        Vec xp = x, xm = x;
        xp[i] += hi;
        xm[i] -= hi;
        H(i, i) = (f(xp) - 2 * f0 + f(xm)) / (hi * hi);
      } else {
        Vec pp = x, pm = x, mp = x, mm = x;
        pp[i] += hi, pp[j] += hj;
        pm[i] += hi, pm[j] -= hj;
        mp[i] -= hi, mp[j] += hj;
        mm[i] -= hi, mm[j] -= hj;
        H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * hi * hj);
      }
    }
  return H;
}

void LogConcaveDensity::fit_truncation_box() {
  const int n = n_;
  auto F = [this](const Vec& x) { return f(x); };
  // Global minimum through nested slices {x_0 = r}.
  auto slice_min = [&](int axis, double r) {
    Mat Bi(n, n - 1);
    Vec o = Vec::Zero(n);
    o[axis] = r;
    for (int j = 0, c = 0; j < n; ++j)
      if (j != axis) Bi.col(c++) = Vec::Unit(n, j);
    return minimize_affine(F, o, Bi, std::nullopt, 1.0).value;
  };
  auto top = detail::line_minimize([&](double r) { return slice_min(0, r); }, 1.0);
  const double fstar = top.value;
  if (!std::isfinite(fstar)) throw DomainError("density potential has no finite minimum");
  lo_.resize(n);
  hi_.resize(n);
  for (int axis = 0; axis < n; ++axis) {
    auto centre = detail::line_minimize([&](double r) { return slice_min(axis, r); }, 1.0).argmin;
    for (int dir : {-1, 1}) {
      auto above = [&](double r) { return slice_min(axis, r) - fstar > kTruncationLevel; };
      double step = 1.0, r = centre + dir * step;
      while (!above(r)) {
        step *= 2.0;
        r = centre + dir * step;
        if (step > 1e6) throw DomainError("density is not integrable");
      }
      double edge = detail::bisect_boundary(above, centre + dir * step * 0.5, r, 80);
      (dir < 0 ? lo_[axis] : hi_[axis]) = edge;
    }
  }
}

namespace {

// Trapezoid nodes on the slice {<u,x> = r} within the box, with weights for
// the full grid and for the even sub-grid used by the Richardson estimate.
struct SliceGrid {
  std::vector<std::vector<Vec>> rows;
  std::vector<std::vector<double>> fine;
  std::vector<std::vector<double>> coarse;
};

std::vector<double> trapezoid_weights(std::size_t N, double h, std::size_t stride) {
  std::vector<double> w(N + 1, 0.0);
  for (std::size_t j = 0; j + stride <= N; j += stride) {
    w[j] += 0.5 * h * static_cast<double>(stride);
    w[j + stride] += 0.5 * h * static_cast<double>(stride);
  }
  return w;
}

SliceGrid make_slice_grid(const LogConcaveDensity& rho, const Vec& u, double r, std::size_t N) {
  N += N % 2;
  SliceGrid g;
  const int n = rho.dim();
  const Vec o = r * u;
  if (n == 1) {
    if (rho.in_box(o)) {
      g.rows.push_back({o});
      g.fine.push_back({1.0});
      g.coarse.push_back({1.0});
    }
    return g;
  }
  const Mat B = orthonormal_complement(u);
  auto row_along = [&](const Vec& base, const Vec& dir, double wf, double wc) {
    Interval I = feasible_interval(base, dir, rho.lo(), rho.hi());
    if (!(I.hi > I.lo)) return;
    double h = (I.hi - I.lo) / static_cast<double>(N);
    std::vector<Vec> pts(N + 1);
    for (std::size_t j = 0; j <= N; ++j) pts[j] = base + (I.lo + h * static_cast<double>(j)) * dir;
    auto f1 = trapezoid_weights(N, h, 1), f2 = trapezoid_weights(N, h, 2);
    for (auto& v : f1) v *= wf;
    for (auto& v : f2) v *= wc;
    g.rows.push_back(std::move(pts));
    g.fine.push_back(std::move(f1));
    g.coarse.push_back(std::move(f2));
  };
  if (n == 2) {
    row_along(o, B.col(0), 1.0, 1.0);
    return g;
  }
  Interval I = polygon_extent(o, B, rho.lo(), rho.hi());
  if (!(I.hi > I.lo)) return g;
  double h = (I.hi - I.lo) / static_cast<double>(N);
  auto w1 = trapezoid_weights(N, h, 1), w2 = trapezoid_weights(N, h, 2);
  for (std::size_t i = 0; i <= N; ++i) {
    std::size_t before = g.rows.size();
    row_along(o + (I.lo + h * static_cast<double>(i)) * B.col(0), B.col(1), w1[i], w2[i]);
    if (g.rows.size() == before) {
      g.rows.emplace_back();
      g.fine.emplace_back();
      g.coarse.emplace_back();
    }
  }
  return g;
}

// Fixed reference level so that exp(-(f - ref)) stays in range.
double reference_level(const LogConcaveDensity& rho) {
  const int n = rho.dim();
  const int K = 17;
  double best = kInf;
  std::array<int, 3> idx{};
  int total = 1;
  for (int i = 0; i < n; ++i) total *= K;
  for (int t = 0; t < total; ++t) {
    int rem = t;
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      idx[i] = rem % K;
      rem /= K;
      x[i] = rho.lo()[i] + (rho.hi()[i] - rho.lo()[i]) * idx[i] / (K - 1.0);
    }
    best = std::min(best, rho.f(x));
  }
  return std::isfinite(best) ? best : 0.0;
}

struct GridSums {
  double fine = 0.0;
  double coarse = 0.0;
  double crossing = 0.0;  // mass of cells where the weight changes value
};

GridSums integrate(const LogConcaveDensity& rho, const SliceGrid& g, double ref,
                   const std::function<double(const Vec&)>& weight, bool indicator = false) {
  GridSums s;
  detail::KahanSum fine, coarse;
  std::vector<double> prev_w, prev_e;
  for (std::size_t i = 0; i < g.rows.size(); ++i) {
    const auto& row = g.rows[i];
    std::vector<double> wv(row.size()), ev(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      double fx = rho.f(row[j]);
      double e = std::isfinite(fx) ? std::exp(-(fx - ref)) : 0.0;
      double w = (weight && e > 0) ? weight(row[j]) : 1.0;
      wv[j] = w;
      ev[j] = e;
      fine.add(g.fine[i][j] * w * e);
      coarse.add(g.coarse[i][j] * w * e);
      if (indicator && j > 0 && wv[j] != wv[j - 1])
        s.crossing += std::max(g.fine[i][j], g.fine[i][j - 1]) * std::max(ev[j], ev[j - 1]);
      if (indicator && prev_w.size() == row.size() && wv[j] != prev_w[j])
        s.crossing += std::max(g.fine[i][j], g.fine[i - 1][j]) * std::max(ev[j], prev_e[j]);
    }
    prev_w = std::move(wv);
    prev_e = std::move(ev);
  }
  s.fine = fine.value();
  s.coarse = coarse.value();
  return s;
}

SliceIntegral richardson(const GridSums& s) {
  return {s.fine + (s.fine - s.coarse) / 3.0, std::max(std::abs(s.fine - s.coarse) / 3.0, s.crossing)};
}

Vec unit(const Vec& v) {
  double nv = v.norm();
  if (!(nv > 0)) throw DomainError("direction must be nonzero");
  return v / nv;
}

void require_dim(const LogConcaveDensity& rho, const Vec& v) {
  if (v.size() != rho.dim()) throw DomainError("vector dimension does not match the density");
}

}  // namespace

double LogConcaveDensity::log_normalizer() const {
  if (log_z_) return *log_z_;
  const double ref = reference_level(*this);
  Vec u = Vec::Unit(n_, 0);
  const std::size_t R = 801;
  double h = (hi_[0] - lo_[0]) / static_cast<double>(R - 1);
  detail::KahanSum z;
  for (std::size_t k = 0; k < R; ++k) {
    auto g = make_slice_grid(*this, u, lo_[0] + h * static_cast<double>(k), 256);
    double v = richardson(integrate(*this, g, ref, {})).value;
    z.add((k == 0 || k + 1 == R ? 0.5 : 1.0) * h * v);
  }
  log_z_ = std::log(z.value()) - ref;
  return *log_z_;
}

SliceIntegral slice_integral(const LogConcaveDensity& rho, const Vec& u, double r,
                             std::size_t resolution, const std::function<double(const Vec&)>& weight) {
  require_dim(rho, u);
  auto g = make_slice_grid(rho, unit(u), r, resolution);
  auto out = richardson(integrate(rho, g, reference_level(rho), weight));
  // Report exp(-f) itself rather than the shifted integrand.
  double scale = std::exp(-reference_level(rho));
  return {out.value * scale, out.error * scale};
}

DensityGrid1D marginal_density(const LogConcaveDensity& rho, const Vec& eta, std::size_t points) {
  require_dim(rho, eta);
  if (points < 3) throw GridError("marginal needs >= 3 points");
  const Vec u = unit(eta);
  const int n = rho.dim();
  double rmin = kInf, rmax = -kInf;
  for (int corner = 0; corner < (1 << n); ++corner) {
    Vec c(n);
    for (int i = 0; i < n; ++i) c[i] = ((corner >> i) & 1) ? rho.hi()[i] : rho.lo()[i];
    rmin = std::min(rmin, u.dot(c));
    rmax = std::max(rmax, u.dot(c));
  }
  const double h = (rmax - rmin) / static_cast<double>(points - 1);
  const double ref = reference_level(rho);
  const std::size_t cap = n == 2 ? 8192 : 512;
  std::vector<double> values(points);
  for (std::size_t N = n == 3 ? 64 : 256;; N *= 2) {
    double worst = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      auto s = richardson(integrate(rho, make_slice_grid(rho, u, rmin + h * static_cast<double>(k), N), ref, {}));
      values[k] = std::max(0.0, s.value);
      worst = std::max(worst, s.error);
      peak = std::max(peak, values[k]);
    }
    if (n == 1 || worst <= 1e-6 * peak) break;
    if (N >= cap) {
      std::ostringstream msg;
      msg << "marginal quadrature error " << worst / peak << " exceeds 1e-6";
      throw QuadratureError(msg.str());
    }
  }
  return DensityGrid1D::from_values(rmin, h, std::move(values));
}

CurvatureValue d_curvature(const LogConcaveDensity& rho, const Vec& eta, const Vec& x, double t) {
  require_dim(rho, eta);
  require_dim(rho, x);
  if (!(t >= 0)) throw DomainError("t must be >= 0");
  const double fx = rho.f(x);
  if (!std::isfinite(fx)) throw DomainError("d_curvature needs f(x) < inf");
  const double en = eta.norm();
  if (!(en > 0)) throw DomainError("eta must be nonzero");
  const Vec u = eta / en;
  const Vec o = x + (t / en) * u;
  const Mat B = orthonormal_complement(u);
  auto F = [&](const Vec& xp) { return 0.5 * (rho.f(xp) + rho.f(2 * x - xp)) - fx; };
  std::optional<Box> box;
  if (rho.box_is_support())
    box = Box{rho.lo().cwiseMax(2 * x - rho.hi()), rho.hi().cwiseMin(2 * x - rho.lo())};
  auto m = minimize_affine(F, o, B, box, std::max(1e-3, t / en));
  CurvatureValue out;
  out.witness = o + B * m.a;
  out.value = m.value;
  if (!std::isfinite(out.value)) return out;

  if (rho.has_analytic_derivatives() && B.cols() > 0) {
    auto interior = [&](const Vec& xp) {
      return !box || ((xp - box->lo).minCoeff() > 1e-9 && (box->hi - xp).minCoeff() > 1e-9);
    };
    auto proj_grad = [&](const Vec& xp) {
      return Vec(B.transpose() * (0.5 * (rho.gradient(xp) - rho.gradient(2 * x - xp))));
    };
    // Newton polish on the slice.
    for (int it = 0; it < 30 && interior(out.witness); ++it) {
      Vec g = proj_grad(out.witness);
      if (g.norm() == 0.0) break;
      Mat H = B.transpose() * (0.5 * (rho.hessian(out.witness) + rho.hessian(2 * x - out.witness))) * B;
      Eigen::LDLT<Mat> ldlt(H);
      if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0) break;
      Vec step = ldlt.solve(g);
      Vec trial = out.witness - B * step;
      double ft = F(trial);
      if (!interior(trial)) break;
      // Near the minimum values agree to roundoff; the gradient decides.
      bool better = ft < out.value ||
                    (ft <= out.value + 1e-13 * std::max(1.0, std::abs(fx)) && proj_grad(trial).norm() < g.norm());
      if (!better) break;
      bool done = (trial - out.witness).norm() <= 1e-15 * (1 + out.witness.norm());
      out.witness = trial;
      out.value = std::min(out.value, ft);
      if (done) break;
    }
    if (interior(out.witness)) {
      Vec g = proj_grad(out.witness);
      double scale = std::max({1.0, rho.gradient(out.witness).norm(), rho.gradient(2 * x - out.witness).norm()});
      // A flat minimum (singular Hessian) still has a small gradient.
      if (g.norm() > 1e-10 * scale) {
        std::ostringstream msg;
        msg << "d_curvature: projected gradient " << g.norm() << " above tolerance";
        throw ConvergenceError(msg.str());
      }
    }
  }
  out.value = std::max(0.0, out.value);
  return out;
}

double one_point_convexity(const LogConcaveDensity& rho, const Vec& x, const Vec& n, double gamma) {
  if (!(gamma > 0)) throw DomainError("gamma must be positive");
  return 2.0 * d_curvature(rho, unit(n), x, gamma).value;
}

GammaEta gamma_eta(const LogConcaveDensity& rho, const Vec& eta, double D, double s, double t,
                   std::size_t resolution) {
  require_dim(rho, eta);
  if (!(D >= 0)) throw DomainError("D must be >= 0");
  const double en = eta.norm();
  if (!(en > 0)) throw DomainError("eta must be nonzero");
  const Vec u = eta / en;
  const double ref = reference_level(rho);
  auto g = make_slice_grid(rho, u, s / en, resolution);
  auto den = richardson(integrate(rho, g, ref, {}));
  if (!(den.value > 0)) throw DomainError("gamma_eta needs alpha_eta(s) > 0");
  if (D == 0.0) return {1.0, 0.0};
  const double slack = 1e-9 * std::max(1.0, D);
  auto num = richardson(integrate(rho, g, ref, [&](const Vec& x) {
    return d_curvature(rho, eta, x, t).value >= D - slack ? 1.0 : 0.0;
  }, true));
  GammaEta out;
  out.value = std::clamp(num.value / den.value, 0.0, 1.0);
  out.error = (num.error + out.value * den.error) / den.value;
  return out;
}

namespace {

// Slice integral refined until its error is below rel * value (or the cap).
SliceIntegral accurate_slice(const LogConcaveDensity& rho, const Vec& u, double r, double ref) {
  const std::size_t cap = rho.dim() == 3 ? 512 : 8192;
  SliceIntegral s;
  for (std::size_t N = 64;; N *= 2) {
    s = richardson(integrate(rho, make_slice_grid(rho, u, r, N), ref, {}));
    if (rho.dim() == 1 || s.error <= 1e-12 * std::abs(s.value) || N >= cap) return s;
  }
}

}  // namespace

CheckReport check_quantitative_logconcavity(const LogConcaveDensity& rho, const Vec& eta, double s,
                                            double t, double D, std::size_t resolution) {
  require_dim(rho, eta);
  if (!(t > 0)) throw DomainError("t must be positive");
  const double en = eta.norm();
  if (!(en > 0)) throw DomainError("eta must be nonzero");
  const Vec u = eta / en;
  const double ref = reference_level(rho);
  auto I0 = accurate_slice(rho, u, s / en, ref);
  if (!(I0.value > 0)) throw DomainError("the check needs alpha_eta(s) > 0");
  auto Im = accurate_slice(rho, u, (s - t) / en, ref);
  auto Ip = accurate_slice(rho, u, (s + t) / en, ref);
  auto gam = gamma_eta(rho, eta, D, s, t, resolution);
  CheckReport r;
  double prod = std::max(0.0, Im.value) * std::max(0.0, Ip.value);
  r.lhs = std::sqrt(prod) / I0.value;
  double shrink = -std::expm1(-D);
  r.rhs = 1.0 - gam.value * shrink;
  double rel = I0.error / I0.value;
  if (Im.value > 0 && Ip.value > 0) rel += 0.5 * (Im.error / Im.value + Ip.error / Ip.value);
  double err = r.lhs * rel + shrink * gam.error;
  r.tolerance = 10.0 * err + 1e-12;
  r.pass = r.lhs <= r.rhs + r.tolerance;
  std::ostringstream d;
  d << "gamma = " << gam.value << " (+- " << gam.error << ")";
  r.detail = d.str();
  return r;
}

CheckReport check_lemma_app_main(const LogConcaveDensity& rho, const Vec& n, double t,
                                 std::size_t points) {
  require_dim(rho, n);
  if (!(t > 0)) throw DomainError("t must be positive");
  if (points < 5) throw GridError("need >= 5 points");
  points += 1 - points % 2;
  const Vec u = unit(n);
  const int dim = rho.dim();
  double rmin = kInf, rmax = -kInf;
  for (int corner = 0; corner < (1 << dim); ++corner) {
    Vec c(dim);
    for (int i = 0; i < dim; ++i) c[i] = ((corner >> i) & 1) ? rho.hi()[i] : rho.lo()[i];
    rmin = std::min(rmin, u.dot(c));
    rmax = std::max(rmax, u.dot(c));
  }
  const double h = (rmax - rmin) / static_cast<double>(points - 1);
  const double ref = reference_level(rho);
  auto indicator = [&](const Vec& x) {
    return hess_inverse_form(rho.hessian(x), u) <= t * (1 + 1e-9) ? 1.0 : 0.0;
  };
  const std::size_t N = dim == 3 ? 64 : 256;
  std::vector<double> I(points), J(points), Ie(points), Je(points);
  for (std::size_t k = 0; k < points; ++k) {
    auto g = make_slice_grid(rho, u, rmin + h * static_cast<double>(k), N);
    auto a = richardson(integrate(rho, g, ref, {}));
    auto b = richardson(integrate(rho, g, ref, indicator, true));
    I[k] = a.value;
    Ie[k] = a.error;
    J[k] = b.value;
    Je[k] = b.error;
  }
  auto trap = [&](const std::vector<double>& v, std::size_t stride) {
    detail::KahanSum s;
    for (std::size_t k = 0; k + stride < v.size(); k += stride) s.add(0.5 * (v[k] + v[k + stride]));
    return s.value() * h * static_cast<double>(stride);
  };
  double Z = trap(I, 1), Z2 = trap(I, 2), P = trap(J, 1), P2 = trap(J, 2);
  double slice_err_I = trap(Ie, 1), slice_err_J = trap(Je, 1);
  double errZ = std::abs(Z - Z2) / 3.0 + slice_err_I;
  double errP = std::abs(P - P2) / 3.0 + slice_err_J;
  double p = std::clamp(P / Z, 0.0, 1.0);
  double dp = (errP + p * errZ) / Z;
  double sup = *std::max_element(I.begin(), I.end());
  std::size_t kmax = static_cast<std::size_t>(std::max_element(I.begin(), I.end()) - I.begin());
  CheckReport r;
  r.lhs = sup / Z;
  auto bound = [&](double q) { return std::pow(q, 1.5) / ((8 - 4 * q) * std::sqrt(2 * t)); };
  r.rhs = bound(p);
  double slope = std::abs(bound(std::min(1.0, p + dp)) - r.rhs) + std::abs(r.rhs - bound(std::max(0.0, p - dp)));
  double err = r.lhs * (Ie[kmax] / std::max(sup, 1e-300) + errZ / Z) + slope;
  r.tolerance = 10.0 * err + 1e-12;
  r.pass = r.lhs >= r.rhs - r.tolerance;
  std::ostringstream d;
  d << "p = " << p;
  r.detail = d.str();
  return r;
}

CheckReport check_marginal_curvature(const LogConcaveDensity& rho, const Vec& n, double s, double h,
                                     std::size_t resolution) {
  require_dim(rho, n);
  if (!(h > 0)) throw DomainError("h must be positive");
  const Vec u = unit(n);
  const double ref = reference_level(rho);
  auto slice = [&](double r) { return richardson(integrate(rho, make_slice_grid(rho, u, r, resolution), ref, {})); };
  auto I0 = slice(s);
  if (!(I0.value > 0)) throw DomainError("the check needs alpha(s) > 0");
  auto second = [&](double step, double& err) {
    auto p = slice(s + step), m = slice(s - step);
    err = (p.error / p.value + 2 * I0.error / I0.value + m.error / m.value) / (step * step);
    return -(std::log(p.value) - 2 * std::log(I0.value) + std::log(m.value)) / (step * step);
  };
  double e1 = 0, e2 = 0;
  double fd = second(h, e1), fd2 = second(2 * h, e2);
  auto avg = richardson(integrate(rho, make_slice_grid(rho, u, s, resolution), ref, [&](const Vec& x) {
    double q = hess_inverse_form(rho.hessian(x), u);
    return std::isfinite(q) ? 1.0 / q : 0.0;
  }));
  CheckReport r;
  r.lhs = fd;
  r.rhs = avg.value / I0.value;
  double err = std::abs(fd - fd2) / 3.0 + e1 + (avg.error + r.rhs * I0.error) / I0.value;
  r.tolerance = 10.0 * err + 1e-12;
  r.pass = r.lhs >= r.rhs - r.tolerance;
  r.detail = "finite-difference -(log alpha)'' against the slice average of 1/<n, H^-1 n>";
  return r;
}

}  // namespace gradflux
