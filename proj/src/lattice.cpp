#include "gradflux/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <set>
#include <limits>
#include <string>
#include <tuple>

#include "gradflux/error.hpp"

namespace gradflux {

std::size_t default_vertex_limit() { return std::size_t{1} << 24; }

namespace {

std::size_t checked_volume(int d, int side, std::size_t max_vertices) {
  std::size_t n = 1;
  for (int j = 0; j < d; ++j) {
    if (n > max_vertices / static_cast<std::size_t>(side))
      throw SizeError("lattice exceeds the vertex budget");
    n *= static_cast<std::size_t>(side);
  }
  if (n > max_vertices) throw SizeError("lattice exceeds the vertex budget");
  return n;
}

}  // namespace

LatticeGraph LatticeGraph::torus(int d, int L, std::size_t max_vertices) {
  if (d < 2 || L < 2) throw SizeError("torus needs d >= 2 and L >= 2");
  LatticeGraph g;
  g.kind_ = GraphKind::torus;
  g.dim_ = d;
  g.side_ = 2 * L;
  g.offset_ = -L + 1;
  g.n_ = checked_volume(d, g.side_, max_vertices);
  std::vector<std::size_t> stride(d, 1);
  for (int j = 1; j < d; ++j) stride[j] = stride[j - 1] * g.side_;
  g.edges_.reserve(g.n_ * d);
  for (std::size_t v = 0; v < g.n_; ++v) {
    for (int j = 0; j < d; ++j) {
      std::size_t digit = (v / stride[j]) % g.side_;
      std::size_t head = digit + 1 < static_cast<std::size_t>(g.side_) ? v + stride[j]
                                                                        : v - digit * stride[j];
      g.edges_.push_back({v, head, j});
    }
  }
  std::vector<int> zero(d, 0);
  g.boundary_ = {g.vertex_at(zero)};
  g.values_.assign(g.n_, 0.0);
  g.finalize();
  return g;
}

LatticeGraph LatticeGraph::box(int d, int L, std::size_t max_vertices) {
  if (d < 1 || L < 1) throw SizeError("box needs d >= 1 and L >= 1");
  LatticeGraph g;
  g.kind_ = GraphKind::box;
  g.dim_ = d;
  g.side_ = L;
  g.offset_ = 1;
  g.n_ = checked_volume(d, L, max_vertices);
  std::vector<std::size_t> stride(d, 1);
  for (int j = 1; j < d; ++j) stride[j] = stride[j - 1] * L;
  for (std::size_t v = 0; v < g.n_; ++v) {
    bool shell = false;
    for (int j = 0; j < d; ++j) {
      std::size_t digit = (v / stride[j]) % L;
      if (digit == 0 || digit + 1 == static_cast<std::size_t>(L)) shell = true;
      if (digit + 1 < static_cast<std::size_t>(L)) g.edges_.push_back({v, v + stride[j], j});
    }
    if (shell) g.boundary_.push_back(v);
  }
  g.values_.assign(g.n_, 0.0);
  g.finalize();
  return g;
}

LatticeGraph LatticeGraph::custom(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                  std::vector<std::size_t> boundary,
                                  std::vector<double> boundary_values) {
  if (n == 0) throw DomainError("graph needs at least one vertex");
  LatticeGraph g;
  g.kind_ = GraphKind::custom;
  g.n_ = n;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) throw DomainError("edge endpoint out of range");
    if (a == b) throw DomainError("self loops are not allowed");
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second) throw DomainError("duplicate edge");
    g.edges_.push_back({a, b, -1});
  }
  std::sort(g.edges_.begin(), g.edges_.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.tail, x.head) < std::tie(y.tail, y.head);
  });
  g.values_.assign(n, 0.0);
  if (!boundary_values.empty() && boundary_values.size() != boundary.size())
    throw DomainError("boundary values must match the boundary set");
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    if (boundary[k] >= n) throw DomainError("boundary vertex out of range");
    if (!boundary_values.empty()) g.values_[boundary[k]] = boundary_values[k];
  }
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
  g.boundary_ = std::move(boundary);
  g.finalize();
  if (!g.connected()) throw DomainError("graph must be connected");
  return g;
}

void LatticeGraph::finalize() {
  offsets_.assign(n_ + 1, 0);
  for (const auto& e : edges_) {
    ++offsets_[e.tail + 1];
    ++offsets_[e.head + 1];
  }
  for (std::size_t v = 0; v < n_; ++v) offsets_[v + 1] += offsets_[v];
  incidence_.resize(offsets_[n_]);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto& e = edges_[k];
    incidence_[fill[e.tail]++] = {e.head, k};
    incidence_[fill[e.head]++] = {e.tail, k};
  }
  pinned_.assign(n_, 0);
  for (auto b : boundary_) pinned_[b] = 1;
}

std::span<const Incidence> LatticeGraph::incident(std::size_t v) const {
  return {incidence_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

std::vector<int> LatticeGraph::coordinates(std::size_t v) const {
  if (!has_coordinates()) throw ModeError("custom graphs carry no coordinates");
  std::vector<int> c(dim_);
  for (int j = 0; j < dim_; ++j) {
    c[j] = static_cast<int>(v % side_) + offset_;
    v /= side_;
  }
  return c;
}

std::size_t LatticeGraph::vertex_at(const std::vector<int>& coords) const {
  if (!has_coordinates()) throw ModeError("custom graphs carry no coordinates");
  if (coords.size() != static_cast<std::size_t>(dim_)) throw DomainError("coordinate arity");
  std::size_t v = 0, stride = 1;
  for (int j = 0; j < dim_; ++j) {
    int digit = coords[j] - offset_;
    if (kind_ == GraphKind::torus) digit = ((digit % side_) + side_) % side_;
    if (digit < 0 || digit >= side_) throw DomainError("coordinate outside the lattice");
    v += static_cast<std::size_t>(digit) * stride;
    stride *= side_;
  }
  return v;
}

int LatticeGraph::l1_norm(std::size_t v) const {
  int s = 0;
  for (int c : coordinates(v)) s += std::abs(c);
  return s;
}

std::size_t LatticeGraph::origin() const {
  if (kind_ != GraphKind::torus) throw ModeError("origin is defined for tori");
  return vertex_at(std::vector<int>(dim_, 0));
}

void LatticeGraph::require_surface_model() const {
  if (boundary_.empty() || boundary_.size() >= n_)
    throw DomainError("boundary set must be a nonempty proper subset");
}

LatticeGraph LatticeGraph::with_boundary(std::vector<std::size_t> boundary,
                                         std::vector<double> values) const {
  LatticeGraph g = *this;
  if (!values.empty() && values.size() != boundary.size())
    throw DomainError("boundary values must match the boundary set");
  g.values_.assign(n_, 0.0);
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    if (boundary[k] >= n_) throw DomainError("boundary vertex out of range");
    if (!values.empty()) g.values_[boundary[k]] = values[k];
  }
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
  g.boundary_ = std::move(boundary);
  g.finalize();
  return g;
}

std::uint64_t LatticeGraph::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t x) {
    for (int k = 0; k < 8; ++k) {
      h ^= (x >> (8 * k)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(kind_));
  mix(static_cast<std::uint64_t>(dim_));
  mix(static_cast<std::uint64_t>(side_));
  mix(n_);
  for (const auto& e : edges_) {
    mix(e.tail);
    mix(e.head);
  }
  for (auto b : boundary_) {
    mix(b);
    std::uint64_t bits;
    std::memcpy(&bits, &values_[b], sizeof bits);
    mix(bits);
  }
  return h;
}

bool LatticeGraph::connected() const {
  std::vector<char> seen(n_, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (const auto& inc : incident(v))
      if (!seen[inc.neighbor]) {
        seen[inc.neighbor] = 1;
        ++count;
        stack.push_back(inc.neighbor);
      }
  }
  return count == n_;
}

std::vector<VertexMask> LatticeGraph::adjacency_masks() const {
  if (n_ > 64) throw SizeError("bitmask enumeration needs at most 64 vertices");
  std::vector<VertexMask> adj(n_, 0);
  for (const auto& e : edges_) {
    adj[e.tail] |= VertexMask{1} << e.head;
    adj[e.head] |= VertexMask{1} << e.tail;
  }
  return adj;
}

std::size_t enumeration_budget() {
  if (const char* env = std::getenv("GRADFLUX_BUDGET")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return std::min<std::size_t>(static_cast<std::size_t>(v), 40);
  }
  return 22;
}

std::vector<std::size_t> edge_boundary(const LatticeGraph& G, const std::vector<std::size_t>& X) {
  std::vector<char> in(G.vertex_count(), 0);
  for (auto v : X) {
    if (v >= G.vertex_count()) throw DomainError("vertex out of range");
    in[v] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < G.edge_count(); ++k) {
    const auto& e = G.edge(k);
    if (in[e.tail] != in[e.head]) out.push_back(k);
  }
  return out;
}

std::size_t edge_boundary_size(const LatticeGraph& G, VertexMask X) {
  std::size_t c = 0;
  for (const auto& e : G.edges())
    c += (((X >> e.tail) ^ (X >> e.head)) & 1u);
  return c;
}

std::size_t induced_edge_count(const LatticeGraph& G, VertexMask X) {
  std::size_t c = 0;
  for (const auto& e : G.edges())
    c += (((X >> e.tail) & (X >> e.head)) & 1u);
  return c;
}

VertexMask to_mask(const std::vector<std::size_t>& X) {
  VertexMask m = 0;
  for (auto v : X) {
    if (v >= 64) throw SizeError("bitmask vertex out of range");
    m |= VertexMask{1} << v;
  }
  return m;
}

std::vector<std::size_t> from_mask(VertexMask X) {
  std::vector<std::size_t> out;
  while (X) {
    out.push_back(static_cast<std::size_t>(std::countr_zero(X)));
    X &= X - 1;
  }
  return out;
}

bool mask_connected(const std::vector<VertexMask>& adj, VertexMask X) {
  if (X == 0) return false;
  VertexMask reached = X & (~X + 1);
  VertexMask frontier = reached;
  while (frontier) {
    VertexMask next = 0;
    while (frontier) {
      int b = std::countr_zero(frontier);
      frontier &= frontier - 1;
      next |= adj[b];
    }
    next &= X & ~reached;
    reached |= next;
    frontier = next;
  }
  return reached == X;
}

std::vector<VertexMask> connected_cuts(const LatticeGraph& G) {
  const std::size_t n = G.vertex_count();
  if (n > enumeration_budget()) throw SizeError("connected_cuts: graph exceeds the enumeration budget");
  auto adj = G.adjacency_masks();
  const VertexMask full = n == 64 ? ~VertexMask{0} : (VertexMask{1} << n) - 1;
  std::vector<VertexMask> out;
  for (VertexMask X = 1; X < full; ++X)
    if (mask_connected(adj, X) && mask_connected(adj, full ^ X)) out.push_back(X);
  return out;
}

std::size_t level_count(std::size_t N) {
  if (N == 0) throw DomainError("empty graph");
  return static_cast<std::size_t>(std::bit_width(N) - 1);
}

IsoperimetryProfile isoperimetry_profile(const LatticeGraph& G, std::size_t v,
                                         const std::vector<VertexMask>& cuts) {
  const std::size_t N = G.vertex_count();
  if (v >= N) throw DomainError("vertex out of range");
  IsoperimetryProfile P;
  P.vertex = v;
  P.vertex_count = N;
  P.levels = level_count(N);
  P.M.assign(P.levels, std::nullopt);
  P.m.assign(P.levels, std::nullopt);
  for (VertexMask X : cuts) {
    if (!((X >> v) & 1u)) continue;
    std::size_t k = static_cast<std::size_t>(std::popcount(X));
    std::size_t boundary = edge_boundary_size(G, X);
    double big = static_cast<double>(induced_edge_count(G, X) + boundary);
    for (std::size_t i = 1; i <= P.levels; ++i) {
      std::size_t lo = N >> (i + 1), hi = N >> i;
      if (k <= lo || k > hi) continue;
      auto& M = P.M[i - 1];
      auto& m = P.m[i - 1];
      if (!M || big > *M) M = big;
      if (!m || static_cast<double>(boundary) < *m) m = static_cast<double>(boundary);
    }
  }
  return P;
}

IsoperimetryProfile isoperimetry_profile(const LatticeGraph& G, std::size_t v,
                                         const ProfileOptions& options) {
  if (options.mode == ProfileMode::exact) return isoperimetry_profile(G, v, connected_cuts(G));
  const int d = G.dimension();
  if (d < 1) throw ModeError("analytic profile needs a lattice dimension");
  const std::size_t N = G.vertex_count();
  IsoperimetryProfile P;
  P.vertex = v;
  P.vertex_count = N;
  P.levels = level_count(N);
  const double kappa_M = 2.0;
  const double kappa_m = options.percolated ? 0.5 : 1.0;
  for (std::size_t i = 1; i <= P.levels; ++i) {
    double Mi = d * std::ceil(static_cast<double>(N) / std::ldexp(1.0, static_cast<int>(i))) * kappa_M;
    double mi = std::ceil(std::pow(static_cast<double>(N) / std::ldexp(1.0, static_cast<int>(i) + 1),
                                   (d - 1.0) / d)) *
                kappa_m;
    P.M.push_back(Mi);
    P.m.push_back(mi);
  }
  return P;
}

std::size_t count_connected_cuts(const LatticeGraph& G, std::size_t a, std::size_t m) {
  const std::size_t N = G.vertex_count();
  if (a >= N) throw DomainError("vertex out of range");
  std::size_t count = 0;
  for (VertexMask X : connected_cuts(G)) {
    if (!((X >> a) & 1u)) continue;
    if (4 * static_cast<std::size_t>(std::popcount(X)) > 3 * N) continue;
    if (edge_boundary_size(G, X) == m) ++count;
  }
  return count;
}

BoxIsoperimetryReport verify_box_isoperimetry(int d, int L) {
  auto G = LatticeGraph::box(d, L);
  const std::size_t N = G.vertex_count();
  if (N > enumeration_budget()) throw SizeError("verify_box_isoperimetry exceeds the budget");
  BoxIsoperimetryReport r;
  r.min_slack = std::numeric_limits<double>::infinity();
  const VertexMask end = VertexMask{1} << N;
  const double expo = (d - 1.0) / d;
  for (VertexMask X = 0; X < end; ++X) {
    ++r.scanned;
    std::size_t k = static_cast<std::size_t>(std::popcount(X));
    if (k == 0 || 4 * k > 3 * N) continue;
    ++r.checked;
    double slack = static_cast<double>(edge_boundary_size(G, X)) - std::pow(static_cast<double>(k), expo);
    if (slack < r.min_slack) {
      r.min_slack = slack;
      r.witness = X;
    }
    if (slack < -1e-12) ++r.violations;
  }
  return r;
}

bool boundary_connectivity_check(const LatticeGraph& G, const std::vector<std::size_t>& X) {
  if (!G.has_coordinates()) throw ModeError("boundary connectivity needs lattice coordinates");
  auto bd = edge_boundary(G, X);
  if (bd.empty()) return true;
  const int d = G.dimension();
  const bool periodic = G.kind() == GraphKind::torus;
  const int period = 2 * G.side();
  // Midpoints in doubled coordinates.
  std::vector<std::vector<int>> mid;
  for (auto k : bd) {
    const auto& e = G.edge(k);
    auto c = G.coordinates(e.tail);
    std::vector<int> m(d);
    for (int j = 0; j < d; ++j) m[j] = 2 * c[j] + (j == e.axis ? 1 : 0);
    mid.push_back(std::move(m));
  }
  auto close = [&](const std::vector<int>& a, const std::vector<int>& b) {
    int dist = 0;
    for (int j = 0; j < d; ++j) {
      int x = std::abs(a[j] - b[j]);
      if (periodic) x = std::min(x, period - x);
      dist = std::max(dist, x);
    }
    return dist > 0 && dist <= 2;
  };
  std::vector<char> seen(bd.size(), 0);
  std::deque<std::size_t> queue{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!queue.empty()) {
    auto i = queue.front();
    queue.pop_front();
    for (std::size_t j = 0; j < bd.size(); ++j)
      if (!seen[j] && close(mid[i], mid[j])) {
        seen[j] = 1;
        ++count;
        queue.push_back(j);
      }
  }
  return count == bd.size();
}

Component percolation_component(const LatticeGraph& G, const std::vector<char>& retained,
                                std::size_t a) {
  if (retained.size() != G.edge_count()) throw DomainError("retained mask must cover every edge");
  if (a >= G.vertex_count()) throw DomainError("vertex out of range");
  std::vector<char> seen(G.vertex_count(), 0);
  std::vector<std::size_t> stack{a}, verts{a};
  seen[a] = 1;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (const auto& inc : G.incident(v))
      if (retained[inc.edge] && !seen[inc.neighbor]) {
        seen[inc.neighbor] = 1;
        verts.push_back(inc.neighbor);
        stack.push_back(inc.neighbor);
      }
  }
  std::sort(verts.begin(), verts.end());
  std::vector<std::size_t> local(G.vertex_count(), 0);
  for (std::size_t k = 0; k < verts.size(); ++k) local[verts[k]] = k;
  Component c{LatticeGraph::custom(1, {}), verts, {}};
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t k = 0; k < G.edge_count(); ++k) {
    const auto& e = G.edge(k);
    if (retained[k] && seen[e.tail] && seen[e.head]) {
      c.edges.push_back(k);
      edges.emplace_back(local[e.tail], local[e.head]);
    }
  }
  c.graph = LatticeGraph::custom(verts.size(), edges);
  return c;
}

AnchoredEvents anchored_isoperimetry_events(const LatticeGraph& G,
                                            const std::vector<char>& retained, std::size_t a,
                                            std::size_t b) {
  auto comp = percolation_component(G, retained, a);
  AnchoredEvents ev;
  ev.component_size = comp.vertices.size();
  ev.connected_to_b = std::binary_search(comp.vertices.begin(), comp.vertices.end(), b);
  const std::size_t Na = comp.vertices.size();
  if (Na > enumeration_budget()) throw SizeError("component exceeds the enumeration budget");
  const std::size_t la =
      static_cast<std::size_t>(std::lower_bound(comp.vertices.begin(), comp.vertices.end(), a) -
                               comp.vertices.begin());
  const double expo = (G.dimension() - 1.0) / G.dimension();
  ev.anchored_isoperimetry = true;
  for (VertexMask X : connected_cuts(comp.graph)) {
    if (!((X >> la) & 1u)) continue;
    std::size_t k = static_cast<std::size_t>(std::popcount(X));
    if (2 * k > Na) continue;
    if (static_cast<double>(edge_boundary_size(comp.graph, X)) <
        0.5 * std::pow(static_cast<double>(k), expo) - 1e-12) {
      ev.anchored_isoperimetry = false;
      break;
    }
  }
  return ev;
}

std::size_t axis_parity_class_of(const LatticeGraph& G, std::size_t e) {
  if (G.kind() != GraphKind::torus) throw ModeError("parity classes are defined on tori");
  const auto& edge = G.edge(e);
  auto c = G.coordinates(edge.tail);
  const int d = G.dimension();
  std::size_t bits = 0, bit = 0;
  for (int j = 0; j < d; ++j) {
    if (j == edge.axis) continue;
    bits |= static_cast<std::size_t>(((c[j] % 2) + 2) % 2) << bit;
    ++bit;
  }
  return static_cast<std::size_t>(edge.axis) * (std::size_t{1} << (d - 1)) + bits;
}

std::vector<AxisParityClass> axis_parity_classes(const LatticeGraph& G) {
  if (G.kind() != GraphKind::torus) throw ModeError("parity classes are defined on tori");
  const int d = G.dimension();
  const std::size_t per_axis = std::size_t{1} << (d - 1);
  std::vector<AxisParityClass> classes(static_cast<std::size_t>(d) * per_axis);
  for (std::size_t k = 0; k < classes.size(); ++k) {
    auto& c = classes[k];
    c.axis = static_cast<int>(k / per_axis);
    c.parity.assign(d, 0);
    std::size_t bits = k % per_axis, bit = 0;
    for (int j = 0; j < d; ++j) {
      if (j == c.axis) continue;
      c.parity[j] = static_cast<int>((bits >> bit) & 1u);
      ++bit;
    }
  }
  for (std::size_t e = 0; e < G.edge_count(); ++e) classes[axis_parity_class_of(G, e)].edges.push_back(e);
  return classes;
}

}  // namespace gradflux
