#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gradflux/lattice.hpp"
#include "gradflux/potential.hpp"

namespace gradflux {

/// mt19937_64 seeded through seed_seq{master, stream}.
class Rng {
 public:
  Rng(std::uint64_t master, std::uint64_t stream);
  // Uniform on (0, 1) from the top 53 bits.
  double uniform();
  double normal();
  std::mt19937_64& engine() { return engine_; }
  const std::mt19937_64& engine() const { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Unnormalised conditional law s -> exp(-sum_i U(s - a_i)) of one free site.
struct ConditionalDensity {
  const Potential* U = nullptr;
  std::vector<double> neighbors;
  double lo = -kInf;  // support, from the domain of U
  double hi = kInf;

  double energy(double s) const;
  double log_density(double s) const { return -energy(s); }
  double slope_right(double s) const;
  double slope_left(double s) const;
};

ConditionalDensity conditional_density(const LatticeGraph& G, const Potential& U,
                                       std::span<const double> phi, std::size_t v);

struct EnvelopeStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  double acceptance() const {
    return proposals == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

// Exact draw. Quadratic U is sampled as a Gaussian; otherwise rejection from
// the piecewise exponential hull of three tangents (left of, at and right of
// the mode). EnvelopeError after 1000 consecutive rejections.
double sample_conditional(const ConditionalDensity& density, Rng& rng,
                          EnvelopeStats* stats = nullptr);

enum class ScanOrder { systematic, random };

struct ChainConfig {
  std::size_t chains = 4;
  std::optional<std::size_t> burn_in;  // default_burn_in when empty
  std::size_t thinning = 1;
  std::size_t samples = 1000;  // retained per chain
  std::uint64_t seed = 1;
  ScanOrder scan = ScanOrder::systematic;
  std::size_t workers = 1;
};

// 20 (2L)^2 sweeps for two-dimensional tori, 20 (2L) otherwise.
std::size_t default_burn_in(const LatticeGraph& G);

/// Configuration of one Gibbs chain. Pinned sites never change.
class SurfaceState {
 public:
  SurfaceState(const LatticeGraph& G, const Potential& U, std::uint64_t seed, std::uint64_t chain);

  const LatticeGraph& graph() const { return *G_; }
  const Potential& potential() const { return *U_; }
  const std::vector<double>& phi() const { return phi_; }
  // Throws DomainError when the pinned values differ or the energy is infinite.
  void set_phi(std::vector<double> phi);
  std::uint64_t sweeps() const { return sweeps_; }
  void set_sweeps(std::uint64_t n) { sweeps_ = n; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  const EnvelopeStats& stats() const { return stats_; }
  double energy() const;

  void update(std::size_t v);
  void sweep(ScanOrder order = ScanOrder::systematic);

 private:
  const LatticeGraph* G_;
  const Potential* U_;
  std::vector<double> phi_;
  std::vector<std::size_t> free_;
  std::uint64_t sweeps_ = 0;
  Rng rng_;
  EnvelopeStats stats_;
  ConditionalDensity scratch_;
};

// Indicator evaluated on each retained configuration.
using SampleEvent = std::function<bool(std::span<const double> phi)>;

/// Retained samples of selected vertices and events, chain by chain.
struct SampleStream {
  std::vector<std::size_t> vertices;
  std::size_t chains = 0;
  std::size_t per_chain = 0;
  std::size_t events = 0;
  std::vector<double> values;        // (chain, sample, vertex)
  std::vector<unsigned char> hits;   // (chain, sample, event)
  std::vector<std::uint64_t> sweep;  // sweep count of each retained sample of a chain
  std::vector<EnvelopeStats> envelope;

  double value(std::size_t chain, std::size_t k, std::size_t j) const {
    return values[(chain * per_chain + k) * vertices.size() + j];
  }
  bool hit(std::size_t chain, std::size_t k, std::size_t event) const {
    return hits[(chain * per_chain + k) * events + event] != 0;
  }
  // Column of `vertex` (graph id) for every chain.
  std::vector<std::vector<double>> series(std::size_t vertex) const;
  std::vector<std::vector<double>> event_series(std::size_t event) const;
};

// Chains run on up to `workers` threads; results do not depend on it.
SampleStream run_chains(const LatticeGraph& G, const Potential& U, const ChainConfig& config,
                        std::vector<std::size_t> vertices, std::vector<SampleEvent> events = {});

struct EstimateWithCI {
  double value = 0.0;
  double se = 0.0;
  std::size_t batches = 0;
  std::size_t batch_length = 0;
};

// Sokal's windowed integrated autocorrelation time (window c = 5).
double integrated_autocorrelation(std::span<const double> x);

// Batch means over all chains; batch length max(1000, 10 tau) and at least
// 16 batches, else InsufficientSamples.
EstimateWithCI batch_means(const std::vector<std::vector<double>>& chains);

EstimateWithCI mean_estimate(const SampleStream& s, std::size_t v);
EstimateWithCI variance_estimate(const SampleStream& s, std::size_t v);
std::vector<EstimateWithCI> tail_estimate(const SampleStream& s, std::size_t v,
                                          const std::vector<double>& t_list);
EstimateWithCI event_probability(const SampleStream& s, std::size_t event);

// |grad_e phi| in S for every e in E0.
SampleEvent gradient_event(const LatticeGraph& G, std::vector<std::size_t> E0, IntervalUnion S);

struct ChessboardReport {
  bool pass = false;
  double lhs = 0.0;        // Pr(E0 in E_S)
  double class_prob = 0.0; // Pr(E_{j,sigma} in E_S)
  double rhs = 0.0;        // class_prob^{|E0| / |E_{j,sigma}|}
  double combined_se = 0.0;
  std::size_t class_index = 0;
};

// Events for E0 and for its axis-parity class; E0 must lie in one class.
std::pair<SampleEvent, SampleEvent> chessboard_events(const LatticeGraph& T,
                                                      const std::vector<std::size_t>& E0,
                                                      const IntervalUnion& S);
// lhs <= rhs + 3 combined SE. A probability estimated as 0 gets the rule of
// three SE 3 / n.
ChessboardReport chessboard_check(const SampleStream& s, const LatticeGraph& T,
                                  const std::vector<std::size_t>& E0, std::size_t e0_event,
                                  std::size_t class_event);
ChessboardReport chessboard_check(const LatticeGraph& T, const Potential& U,
                                  const ChainConfig& config, const std::vector<std::size_t>& E0,
                                  const IntervalUnion& S);

struct GoodEdges {
  std::vector<char> good;  // delta_U(grad_e phi) >= delta
  Component component;     // of the anchor in the good subgraph
};
GoodEdges good_edge_component(const LatticeGraph& G, const Potential& U,
                              std::span<const double> phi, double delta, std::size_t anchor);

// Event D_{E(phi, delta0), v} >= c / tau_d(|v|_1)^2, conductance from the
// origin with unit weights on good edges.
SampleEvent key_lemma_event(const LatticeGraph& G, const Potential& U, double delta0, double c,
                            std::size_t v);
EstimateWithCI key_lemma_frequency(const SampleStream& s, std::size_t event);

}  // namespace gradflux
