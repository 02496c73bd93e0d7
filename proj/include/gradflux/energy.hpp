#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gradflux/lattice.hpp"
#include "gradflux/potential.hpp"

namespace gradflux {

/// Effective conductance between vertex sets: inf of sum w_e (grad chi)^2 over
/// chi = 0 on `zero_set`, chi = 1 on `one_set`. Edges of weight +inf are
/// contracted; the result is 0 when the two sets are not linked by
/// positive-weight edges and +inf when they are linked by rigid ones.
double effective_conductance(const LatticeGraph& G, const std::vector<double>& weights,
                             const std::vector<std::size_t>& zero_set,
                             const std::vector<std::size_t>& one_set);
double effective_conductance(const LatticeGraph& G, const std::vector<double>& weights,
                             std::size_t a, std::size_t b);

// Conductance from the pinned set to v with weights U''(grad psi).
double hessian_weighted_conductance(const LatticeGraph& G, const Potential& U,
                                    const std::vector<double>& psi, std::size_t v);

struct EnergyMinimum {
  double value = 0.0;
  std::vector<double> phi;
  std::size_t sweeps = 0;
};

// inf of sum U(grad phi) over phi(a) = 1, phi(b) = 0, phi in [0,1]^V.
EnergyMinimum direct_energy_infimum(const LatticeGraph& G, const Potential& U, std::size_t a,
                                    std::size_t b, double tolerance = 1e-12);

// One convex term g(x) on [0,1] of a separable program over the simplex.
struct ConvexTerm {
  std::function<double(double)> value;
  std::function<double(double)> derivative;  // right derivative
};

struct SimplexSolution {
  std::vector<double> x;
  double value = 0.0;
  double multiplier = 0.0;
  double kkt_spread = 0.0;  // max |g_i'(x_i) - multiplier| / max(1, |multiplier|) over x_i > 0
  std::size_t iterations = 0;
};

// Minimises sum g_i(x_i) over {x >= 0, sum x = 1}.
SimplexSolution minimize_on_simplex(const std::vector<ConvexTerm>& terms);
std::vector<double> project_to_simplex(std::vector<double> y);

struct SimplexBoundProblem {
  IsoperimetryProfile a;
  IsoperimetryProfile b;
  Potential U = Potential::quadratic();
  double t = 1.0;  // height difference phi(a) - phi(b)
};

struct SimplexBound {
  double value = 0.0;
  std::vector<double> p;  // by level, 0 on undefined levels
  std::vector<double> q;
  double multiplier = 0.0;
  double kkt_spread = 0.0;
};
SimplexBound simplex_energy_bound(const SimplexBoundProblem& problem);

// Cauchy-Schwarz lower bound for U = x^2 from profile constants.
struct CorollaryBound {
  double value = 0.0;
  double C = 0.0;
  double c = 0.0;
  double c0 = 0.0;
};
CorollaryBound corollary_quadratic_bound(const IsoperimetryProfile& a,
                                         const IsoperimetryProfile& b, int d);
CorollaryBound corollary_quadratic_bound(const IsoperimetryProfile& a,
                                         const IsoperimetryProfile& b, int d, double C, double c);

struct EtaEnergy {
  double value = 0.0;
  std::vector<double> psi;
  std::size_t sweeps = 0;
};
// inf of sum W(grad psi) over psi = 0 on the pinned set with <eta, psi> = t.
EtaEnergy d_eta_t(const LatticeGraph& G, const Potential& U, const std::vector<double>& eta,
                  double t, double tolerance = 1e-13);

/// Tabulated W on [0, r_max] with cubic Hermite interpolation.
class GapTable {
 public:
  GapTable(const Potential& U, double r_max, std::size_t points = 2049);
  double operator()(double r) const;
  double r_max() const { return r_max_; }

 private:
  double r_max_;
  double h_;
  std::vector<double> w_;
  std::vector<double> dw_;
  std::function<double(double)> fallback_;
};

struct TailCurve {
  std::vector<double> t;
  std::vector<double> value;
  double exponent_fit = 0.0;
  double residual = 0.0;
  std::string label;
};

// Least-squares slope of log value against log t; residual is the RMS misfit.
void fit_exponent(TailCurve& curve);

TailCurve dstar_exponent(int d, double p, const std::vector<double>& t_grid, std::size_t l = 40);

enum class TailMode { boundary_pinned, mode_centered };
// exp(-D(t)) for boundary-pinned fields; exp(-2 D(t)) at radius 2(t + C) for
// mode-centred fields (C not explicit, reported through `label`).
TailCurve tail_bound(const LatticeGraph& G, const Potential& U, std::size_t v,
                     const std::vector<double>& t_grid, TailMode mode = TailMode::boundary_pinned);

double tau(int d, double R);

}  // namespace gradflux
