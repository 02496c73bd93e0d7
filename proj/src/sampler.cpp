#include "gradflux/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include <boost/random/normal_distribution.hpp>

#include "gradflux/error.hpp"

namespace gradflux {

Rng::Rng(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  boost::random::normal_distribution<double> nd;
  return nd(engine_);
}

double ConditionalDensity::energy(double s) const {
  if (s < lo || s > hi) return kInf;
  double e = 0.0;
  for (double a : neighbors) e += (*U)(s - a);
  return e;
}

double ConditionalDensity::slope_right(double s) const {
  double g = 0.0;
  for (double a : neighbors) g += U->derivative(s - a);
  return g;
}

double ConditionalDensity::slope_left(double s) const {
  double g = 0.0;
  for (double a : neighbors) g -= U->derivative(a - s);
  return g;
}

namespace {

void fill_conditional(ConditionalDensity& c, const LatticeGraph& G, const Potential& U,
                      std::span<const double> phi, std::size_t v) {
  c.U = &U;
  c.neighbors.clear();
  for (const auto& inc : G.incident(v)) c.neighbors.push_back(phi[inc.neighbor]);
  c.lo = -kInf;
  c.hi = kInf;
  double X = U.half_width();
  if (std::isfinite(X)) {
    for (double a : c.neighbors) {
      c.lo = std::max(c.lo, a - X);
      c.hi = std::min(c.hi, a + X);
    }
  }
}

// Leftmost point of [lo, hi] with right slope >= 0, by Illinois steps on the
// slope with a bisection guard.
double locate_mode(const ConditionalDensity& c, double lo, double hi) {
  if (!(hi > lo)) return lo;
  double glo = c.slope_right(lo);
  if (glo >= 0) return lo;
  double ghi = c.slope_right(hi);
  if (ghi < 0) return hi;
  double tol = 1e-4 * (hi - lo);
  int side = 0;
  for (int it = 0; it < 60 && hi - lo > tol; ++it) {
    double x = (glo * hi - ghi * lo) / (glo - ghi);
    if (!(x > lo && x < hi) || it % 4 == 3) x = 0.5 * (lo + hi);
    double g = c.slope_right(x);
    if (g >= 0) {
      hi = x;
      ghi = g;
      if (side == 1) glo *= 0.5;
      side = 1;
    } else {
      lo = x;
      glo = g;
      if (side == -1) ghi *= 0.5;
      side = -1;
    }
  }
  return 0.5 * (lo + hi);
}

// Point beyond m (in direction dir) where the energy exceeds e_m by at least
// one unit but not much more; stops at the support edge.
double level_point(const ConditionalDensity& c, double m, double e_m, double dir, double edge) {
  auto excess = [&](double x) { return c.energy(x) - e_m; };
  double step = 0.5;
  double inner = m;
  double outer = m + dir * step;
  for (int k = 0; k < 200; ++k) {
    if (dir * (outer - edge) >= 0) {
      outer = edge;
      if (excess(edge) < 1.0) return edge;
      break;
    }
    if (excess(outer) >= 1.0) break;
    inner = outer;
    step *= 2;
    outer = m + dir * step;
  }
  for (int k = 0; k < 30; ++k) {
    double e = excess(outer);
    if (e <= 4.0) break;
    double mid = 0.5 * (inner + outer);
    if (excess(mid) >= 1.0)
      outer = mid;
    else
      inner = mid;
  }
  return outer;
}

struct Tangent {
  double x;
  double e;
  double g;
  double at(double y) const { return e + g * (y - x); }
};

struct Piece {
  double a, b;
  Tangent line;
  double mass;
};

double piece_mass(const Piece& p, double ref) {
  double len = p.b - p.a;
  double g = p.line.g;
  double rate = std::abs(g);
  double top = g >= 0 ? p.line.at(p.a) : p.line.at(p.b);
  if (!std::isfinite(top)) {
    if (std::isfinite(len)) throw EnvelopeError("envelope piece without a finite end");
  }
  double w;
  if (!std::isfinite(len)) {
    bool decays = (std::isinf(p.b) && g > 0) || (std::isinf(p.a) && g < 0);
    if (!decays || std::isinf(p.a) == std::isinf(p.b)) throw EnvelopeError("envelope tail does not decay");
    w = 1.0 / rate;
  } else if (rate * len < 1e-12) {
    w = len;
  } else {
    w = -std::expm1(-rate * len) / rate;
  }
  return std::exp(-(top - ref)) * w;
}

double piece_draw(const Piece& p, double u) {
  double len = p.b - p.a;
  double g = p.line.g;
  double rate = std::abs(g);
  double E;
  if (!std::isfinite(len))
    E = -std::log1p(-u) / rate;
  else if (rate * len < 1e-12)
    E = u * len;
  else
    E = std::min(len, -std::log1p(u * std::expm1(-rate * len)) / rate);
  return g >= 0 ? p.a + E : p.b - E;
}

double draw_general(const ConditionalDensity& c, Rng& rng, EnvelopeStats* stats) {
  auto [amin, amax] = std::minmax_element(c.neighbors.begin(), c.neighbors.end());
  double lo = std::max(*amin, c.lo), hi = std::min(*amax, c.hi);
  double m = locate_mode(c, lo, hi);
  double e_m = c.energy(m);

  std::array<Tangent, 3> tan;
  std::size_t K = 0;
  double l = level_point(c, m, e_m, -1.0, c.lo);
  double r = level_point(c, m, e_m, 1.0, c.hi);
  if (l < m) tan[K++] = {l, c.energy(l), c.slope_right(l)};
  double gl = c.slope_left(m), gr = c.slope_right(m);
  tan[K++] = {m, e_m, std::clamp(0.0, gl, std::max(gl, gr))};
  if (r > m) tan[K++] = {r, c.energy(r), c.slope_left(r)};

  std::array<Piece, 3> pieces;
  double left = c.lo;
  for (std::size_t k = 0; k < K; ++k) {
    double right = c.hi;
    if (k + 1 < K) {
      const Tangent& s = tan[k];
      const Tangent& t = tan[k + 1];
      double dg = t.g - s.g;
      double z = dg > 0 ? (s.e - s.g * s.x - t.e + t.g * t.x) / dg : 0.5 * (s.x + t.x);
      if (!std::isfinite(z)) z = 0.5 * (s.x + t.x);
      right = std::clamp(z, s.x, t.x);
    }
    pieces[k] = {left, right, tan[k], 0.0};
    left = right;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    pieces[k].mass = pieces[k].b > pieces[k].a ? piece_mass(pieces[k], e_m) : 0.0;
    total += pieces[k].mass;
  }
  if (!(total > 0) || !std::isfinite(total)) throw EnvelopeError("degenerate envelope");

  for (int attempt = 0; attempt < 1000; ++attempt) {
    double u = rng.uniform() * total;
    std::size_t k = 0;
    while (k + 1 < K && u >= pieces[k].mass) u -= pieces[k++].mass;
    while (pieces[k].mass == 0.0) --k;
    double x = piece_draw(pieces[k], rng.uniform());
    double gap = pieces[k].line.at(x) - c.energy(x);
    if (stats) ++stats->proposals;
    if (std::log(rng.uniform()) <= gap) {
      if (stats) ++stats->accepted;
      return x;
    }
  }
  throw EnvelopeError("1000 consecutive rejections");
}

}  // namespace

ConditionalDensity conditional_density(const LatticeGraph& G, const Potential& U,
                                       std::span<const double> phi, std::size_t v) {
  if (G.is_pinned(v)) throw DomainError("conditional density of a pinned vertex");
  ConditionalDensity c;
  fill_conditional(c, G, U, phi, v);
  return c;
}

double sample_conditional(const ConditionalDensity& c, Rng& rng, EnvelopeStats* stats) {
  if (c.neighbors.empty()) throw DomainError("isolated vertex has no conditional law");
  if (c.U->kind() == Potential::Kind::quadratic) {
    double mean = 0.0;
    for (double a : c.neighbors) mean += a;
    auto k = static_cast<double>(c.neighbors.size());
    mean /= k;
    if (stats) {
      ++stats->proposals;
      ++stats->accepted;
    }
    return mean + rng.normal() / std::sqrt(2.0 * k);
  }
  return draw_general(c, rng, stats);
}

std::size_t default_burn_in(const LatticeGraph& G) {
  auto side = static_cast<std::size_t>(std::max(G.side(), 2));
  if (G.kind() == GraphKind::torus && G.dimension() == 2) return 20 * side * side;
  return 20 * side;
}

SurfaceState::SurfaceState(const LatticeGraph& G, const Potential& U, std::uint64_t seed,
                           std::uint64_t chain)
    : G_(&G), U_(&U), phi_(G.vertex_count(), 0.0), rng_(seed, chain) {
  G.require_surface_model();
  for (std::size_t v = 0; v < G.vertex_count(); ++v) {
    if (G.is_pinned(v))
      phi_[v] = G.boundary_value(v);
    else
      free_.push_back(v);
  }
  if (!std::isfinite(energy())) throw DomainError("zero extension of the boundary values has infinite energy");
}

void SurfaceState::set_phi(std::vector<double> phi) {
  if (phi.size() != G_->vertex_count()) throw DomainError("configuration size mismatch");
  for (std::size_t v : G_->boundary())
    if (phi[v] != G_->boundary_value(v)) throw DomainError("configuration violates the pinning");
  std::swap(phi_, phi);
  if (!std::isfinite(energy())) {
    std::swap(phi_, phi);
    throw DomainError("configuration has infinite energy");
  }
}

double SurfaceState::energy() const {
  double e = 0.0;
  for (const auto& edge : G_->edges()) e += (*U_)(phi_[edge.head] - phi_[edge.tail]);
  return e;
}

void SurfaceState::update(std::size_t v) {
  fill_conditional(scratch_, *G_, *U_, phi_, v);
  phi_[v] = sample_conditional(scratch_, rng_, &stats_);
}

void SurfaceState::sweep(ScanOrder order) {
  if (order == ScanOrder::systematic) {
    for (std::size_t v : free_) update(v);
  } else {
    auto n = static_cast<double>(free_.size());
    for (std::size_t k = 0; k < free_.size(); ++k) {
      auto i = static_cast<std::size_t>(rng_.uniform() * n);
      update(free_[std::min(i, free_.size() - 1)]);
    }
  }
  ++sweeps_;
}

std::vector<std::vector<double>> SampleStream::series(std::size_t vertex) const {
  auto it = std::find(vertices.begin(), vertices.end(), vertex);
  if (it == vertices.end()) throw DomainError("vertex was not recorded");
  auto j = static_cast<std::size_t>(it - vertices.begin());
  std::vector<std::vector<double>> out(chains, std::vector<double>(per_chain));
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t k = 0; k < per_chain; ++k) out[c][k] = value(c, k, j);
  return out;
}

std::vector<std::vector<double>> SampleStream::event_series(std::size_t event) const {
  if (event >= events) throw DomainError("event index out of range");
  std::vector<std::vector<double>> out(chains, std::vector<double>(per_chain));
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t k = 0; k < per_chain; ++k) out[c][k] = hit(c, k, event) ? 1.0 : 0.0;
  return out;
}

SampleStream run_chains(const LatticeGraph& G, const Potential& U, const ChainConfig& config,
                        std::vector<std::size_t> vertices, std::vector<SampleEvent> events) {
  if (config.thinning < 1) throw ConfigError("thinning must be at least 1");
  if (config.chains < 1) throw ConfigError("need at least one chain");
  for (std::size_t v : vertices)
    if (v >= G.vertex_count()) throw DomainError("recorded vertex out of range");
  SampleStream s;
  s.vertices = std::move(vertices);
  s.chains = config.chains;
  s.per_chain = config.samples;
  s.events = events.size();
  s.values.assign(s.chains * s.per_chain * s.vertices.size(), 0.0);
  s.hits.assign(s.chains * s.per_chain * s.events, 0);
  s.sweep.assign(s.per_chain, 0);
  s.envelope.assign(s.chains, {});
  std::size_t burn = config.burn_in.value_or(default_burn_in(G));

  auto run_one = [&](std::size_t c) {
    SurfaceState state(G, U, config.seed, c);
    for (std::size_t k = 0; k < burn; ++k) state.sweep(config.scan);
    for (std::size_t k = 0; k < s.per_chain; ++k) {
      for (std::size_t j = 0; j < config.thinning; ++j) state.sweep(config.scan);
      const auto& phi = state.phi();
      std::size_t row = c * s.per_chain + k;
      for (std::size_t j = 0; j < s.vertices.size(); ++j)
        s.values[row * s.vertices.size() + j] = phi[s.vertices[j]];
      for (std::size_t e = 0; e < s.events; ++e) s.hits[row * s.events + e] = events[e](phi) ? 1 : 0;
      if (c == 0) s.sweep[k] = state.sweeps();
    }
    s.envelope[c] = state.stats();
  };

  std::size_t workers = std::clamp<std::size_t>(config.workers, 1, config.chains);
  if (workers == 1) {
    for (std::size_t c = 0; c < config.chains; ++c) run_one(c);
    return s;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < config.chains; c += workers) run_one(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return s;
}

}  // namespace gradflux
