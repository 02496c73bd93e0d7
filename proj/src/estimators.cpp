#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

#include "gradflux/energy.hpp"
#include "gradflux/error.hpp"
#include "gradflux/sampler.hpp"
#include "numeric.hpp"

namespace gradflux {

double integrated_autocorrelation(std::span<const double> x) {
  std::size_t n = x.size();
  if (n < 2) return 1.0;
  detail::KahanSum acc;
  for (double v : x) acc.add(v);
  double mean = acc.value() / static_cast<double>(n);
  std::size_t N = 1;
  while (N < 2 * n) N <<= 1;
  std::vector<double> padded(N, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> acov;
  fft.inv(acov, spec);
  double c0 = acov[0];
  if (!(c0 > 1e-300 * static_cast<double>(n))) return 1.0;
  double tau = 1.0;
  for (std::size_t M = 1; M < n; ++M) {
    tau += 2.0 * acov[M] / c0;
    if (static_cast<double>(M) >= 5.0 * tau) break;
  }
  return std::max(tau, 1.0);
}

EstimateWithCI batch_means(const std::vector<std::vector<double>>& chains) {
  double tau = 1.0;
  for (const auto& c : chains) tau = std::max(tau, integrated_autocorrelation(c));
  auto b = std::max<std::size_t>(1000, static_cast<std::size_t>(std::ceil(10.0 * tau)));
  std::vector<double> means;
  for (const auto& c : chains) {
    for (std::size_t k = 0; (k + 1) * b <= c.size(); ++k) {
      detail::KahanSum s;
      for (std::size_t i = k * b; i < (k + 1) * b; ++i) s.add(c[i]);
      means.push_back(s.value() / static_cast<double>(b));
    }
  }
  if (means.size() < 16)
    throw InsufficientSamples("batch means needs 16 batches of length " + std::to_string(b) +
                              ", have " + std::to_string(means.size()));
  auto B = static_cast<double>(means.size());
  detail::KahanSum s;
  for (double m : means) s.add(m);
  double mean = s.value() / B;
  detail::KahanSum ss;
  for (double m : means) ss.add((m - mean) * (m - mean));
  return {mean, std::sqrt(ss.value() / (B - 1) / B), means.size(), b};
}

EstimateWithCI mean_estimate(const SampleStream& s, std::size_t v) { return batch_means(s.series(v)); }

EstimateWithCI variance_estimate(const SampleStream& s, std::size_t v) {
  auto chains = s.series(v);
  detail::KahanSum acc;
  std::size_t n = 0;
  bool constant = true;
  double first = chains.empty() || chains[0].empty() ? 0.0 : chains[0][0];
  for (const auto& c : chains) {
    for (double x : c) {
      acc.add(x);
      constant = constant && x == first;
      ++n;
    }
  }
  double mean = n ? acc.value() / static_cast<double>(n) : 0.0;
  for (auto& c : chains)
    for (auto& x : c) x = constant ? 0.0 : (x - mean) * (x - mean);
  return batch_means(chains);
}

std::vector<EstimateWithCI> tail_estimate(const SampleStream& s, std::size_t v,
                                          const std::vector<double>& t_list) {
  auto chains = s.series(v);
  std::vector<EstimateWithCI> out;
  for (double t : t_list) {
    auto ind = chains;
    for (auto& c : ind)
      for (auto& x : c) x = std::abs(x) > t ? 1.0 : 0.0;
    out.push_back(batch_means(ind));
  }
  return out;
}

EstimateWithCI event_probability(const SampleStream& s, std::size_t event) {
  return batch_means(s.event_series(event));
}

SampleEvent gradient_event(const LatticeGraph& G, std::vector<std::size_t> E0, IntervalUnion S) {
  for (std::size_t e : E0)
    if (e >= G.edge_count()) throw DomainError("edge index out of range");
  std::vector<std::pair<std::size_t, std::size_t>> ends;
  for (std::size_t e : E0) ends.emplace_back(G.edge(e).tail, G.edge(e).head);
  return [ends = std::move(ends), S = std::move(S)](std::span<const double> phi) {
    for (auto [a, b] : ends) {
      double g = std::abs(phi[b] - phi[a]);
      bool in = std::any_of(S.begin(), S.end(), [g](const Interval& I) { return g >= I.lo && g <= I.hi; });
      if (!in) return false;
    }
    return true;
  };
}

namespace {

std::size_t common_class(const LatticeGraph& T, const std::vector<std::size_t>& E0) {
  if (E0.empty()) throw DomainError("E0 must be nonempty");
  std::size_t cls = axis_parity_class_of(T, E0.front());
  for (std::size_t e : E0)
    if (axis_parity_class_of(T, e) != cls) throw DomainError("E0 is not inside one axis-parity class");
  return cls;
}

}  // namespace

std::pair<SampleEvent, SampleEvent> chessboard_events(const LatticeGraph& T,
                                                      const std::vector<std::size_t>& E0,
                                                      const IntervalUnion& S) {
  std::size_t cls = common_class(T, E0);
  auto classes = axis_parity_classes(T);
  return {gradient_event(T, E0, S), gradient_event(T, classes[cls].edges, S)};
}

ChessboardReport chessboard_check(const SampleStream& s, const LatticeGraph& T,
                                  const std::vector<std::size_t>& E0, std::size_t e0_event,
                                  std::size_t class_event) {
  ChessboardReport r;
  r.class_index = common_class(T, E0);
  auto classes = axis_parity_classes(T);
  double ratio = static_cast<double>(E0.size()) / static_cast<double>(classes[r.class_index].edges.size());
  auto lhs = event_probability(s, e0_event);
  auto cls = event_probability(s, class_event);
  double n = static_cast<double>(lhs.batches * lhs.batch_length);
  double se_l = lhs.value == 0.0 ? 3.0 / n : lhs.se;
  r.lhs = lhs.value;
  r.class_prob = cls.value;
  r.rhs = std::pow(cls.value, ratio);
  double se_r;
  if (cls.value == 0.0)
    se_r = std::pow(3.0 / static_cast<double>(cls.batches * cls.batch_length), ratio);
  else
    se_r = ratio * std::pow(cls.value, ratio - 1.0) * cls.se;
  r.combined_se = std::hypot(se_l, se_r);
  r.pass = r.lhs <= r.rhs + 3.0 * r.combined_se;
  return r;
}

ChessboardReport chessboard_check(const LatticeGraph& T, const Potential& U,
                                  const ChainConfig& config, const std::vector<std::size_t>& E0,
                                  const IntervalUnion& S) {
  auto [e0, cls] = chessboard_events(T, E0, S);
  auto stream = run_chains(T, U, config, {}, {e0, cls});
  return chessboard_check(stream, T, E0, 0, 1);
}

GoodEdges good_edge_component(const LatticeGraph& G, const Potential& U,
                              std::span<const double> phi, double delta, std::size_t anchor) {
  if (!(delta > 0)) throw DomainError("delta must be positive");
  std::vector<char> good(G.edge_count(), 0);
  for (std::size_t e = 0; e < G.edge_count(); ++e) {
    const auto& E = G.edge(e);
    good[e] = second_order_ratio(U, phi[E.head] - phi[E.tail]).value >= delta ? 1 : 0;
  }
  auto comp = percolation_component(G, good, anchor);
  return {std::move(good), std::move(comp)};
}

SampleEvent key_lemma_event(const LatticeGraph& G, const Potential& U, double delta0, double c,
                            std::size_t v) {
  if (!(delta0 > 0) || !(c > 0)) throw DomainError("delta0 and c must be positive");
  if (G.is_pinned(v)) throw DomainError("key lemma vertex must be free");
  double R = G.has_coordinates() ? static_cast<double>(G.l1_norm(v)) : 1.0;
  double t = tau(G.dimension(), R);
  double threshold = c / (t * t);
  const LatticeGraph* g = &G;
  const Potential* u = &U;
  return [g, u, delta0, threshold, v](std::span<const double> phi) {
    std::vector<double> w(g->edge_count(), 0.0);
    for (std::size_t e = 0; e < g->edge_count(); ++e) {
      const auto& E = g->edge(e);
      w[e] = second_order_ratio(*u, phi[E.head] - phi[E.tail]).value >= delta0 ? 1.0 : 0.0;
    }
    return effective_conductance(*g, w, g->boundary(), {v}) >= threshold;
  };
}

EstimateWithCI key_lemma_frequency(const SampleStream& s, std::size_t event) {
  return event_probability(s, event);
}

}  // namespace gradflux
