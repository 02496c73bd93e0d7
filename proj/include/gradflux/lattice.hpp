#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gradflux {

enum class GraphKind { torus, box, custom };

struct Edge {
  std::size_t tail;
  std::size_t head;
  int axis;  // -1 for custom graphs
};

struct Incidence {
  std::size_t neighbor;
  std::size_t edge;
};

using VertexMask = std::uint64_t;

std::size_t default_vertex_limit();

/// Finite simple connected graph with an optional pinned boundary set.
///
/// Torus T_{2L}^d has vertices {-L+1..L}^d and pins the origin; the box
/// Lambda_L^d has vertices {1..L}^d and pins its boundary shell. Edges are
/// ordered by (tail index, axis) and point from tail to head.
class LatticeGraph {
 public:
  static LatticeGraph torus(int d, int L, std::size_t max_vertices = default_vertex_limit());
  static LatticeGraph box(int d, int L, std::size_t max_vertices = default_vertex_limit());
  static LatticeGraph custom(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                             std::vector<std::size_t> boundary = {},
                             std::vector<double> boundary_values = {});

  GraphKind kind() const { return kind_; }
  int dimension() const { return dim_; }
  // Side length of the vertex grid: 2L for tori, L for boxes.
  int side() const { return side_; }
  std::size_t vertex_count() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  std::span<const Incidence> incident(std::size_t v) const;
  std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }

  bool has_coordinates() const { return kind_ != GraphKind::custom; }
  std::vector<int> coordinates(std::size_t v) const;
  std::size_t vertex_at(const std::vector<int>& coords) const;
  int l1_norm(std::size_t v) const;

  const std::vector<std::size_t>& boundary() const { return boundary_; }
  bool is_pinned(std::size_t v) const { return pinned_[v] != 0; }
  double boundary_value(std::size_t v) const { return values_[v]; }
  const std::vector<double>& boundary_values() const { return values_; }
  std::size_t origin() const;

  // Throws DomainError unless the boundary set is a proper nonempty subset.
  void require_surface_model() const;
  LatticeGraph with_boundary(std::vector<std::size_t> boundary,
                             std::vector<double> values = {}) const;
  std::uint64_t hash() const;
  bool connected() const;
  // Adjacency bitmasks; requires at most 64 vertices.
  std::vector<VertexMask> adjacency_masks() const;

 private:
  void finalize();

  GraphKind kind_ = GraphKind::custom;
  int dim_ = 0;
  int side_ = 0;
  int offset_ = 0;  // coordinate of digit 0
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<Incidence> incidence_;
  std::vector<std::size_t> boundary_;
  std::vector<char> pinned_;
  std::vector<double> values_;
};

std::size_t enumeration_budget();

std::vector<std::size_t> edge_boundary(const LatticeGraph& G, const std::vector<std::size_t>& X);
std::size_t edge_boundary_size(const LatticeGraph& G, VertexMask X);
std::size_t induced_edge_count(const LatticeGraph& G, VertexMask X);
VertexMask to_mask(const std::vector<std::size_t>& X);
std::vector<std::size_t> from_mask(VertexMask X);
bool mask_connected(const std::vector<VertexMask>& adjacency, VertexMask X);

// All X with X, V\X nonempty and both induced subgraphs connected.
std::vector<VertexMask> connected_cuts(const LatticeGraph& G);

enum class ProfileMode { exact, analytic };

struct ProfileOptions {
  ProfileMode mode = ProfileMode::exact;
  bool percolated = false;  // analytic mode: halve the boundary constant
};

/// Per-level data for one vertex: level i = 1..l stored at index i-1.
struct IsoperimetryProfile {
  std::size_t vertex = 0;
  std::size_t vertex_count = 0;
  std::size_t levels = 0;
  std::vector<std::optional<double>> M;
  std::vector<std::optional<double>> m;
};

std::size_t level_count(std::size_t N);
IsoperimetryProfile isoperimetry_profile(const LatticeGraph& G, std::size_t v,
                                         const ProfileOptions& options = {});
IsoperimetryProfile isoperimetry_profile(const LatticeGraph& G, std::size_t v,
                                         const std::vector<VertexMask>& cuts);

std::size_t count_connected_cuts(const LatticeGraph& G, std::size_t a, std::size_t m);

struct BoxIsoperimetryReport {
  std::size_t scanned = 0;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
  VertexMask witness = 0;
};
BoxIsoperimetryReport verify_box_isoperimetry(int d, int L);

// Connectivity of the edge boundary under the l-infinity midpoint adjacency.
bool boundary_connectivity_check(const LatticeGraph& G, const std::vector<std::size_t>& X);

struct Component {
  LatticeGraph graph;
  std::vector<std::size_t> vertices;  // original ids, graph vertex k = vertices[k]
  std::vector<std::size_t> edges;     // original edge ids
};
Component percolation_component(const LatticeGraph& G, const std::vector<char>& retained,
                                std::size_t a);

struct AnchoredEvents {
  bool connected_to_b = false;
  bool anchored_isoperimetry = false;
  std::size_t component_size = 0;
};
AnchoredEvents anchored_isoperimetry_events(const LatticeGraph& G,
                                            const std::vector<char>& retained, std::size_t a,
                                            std::size_t b);

struct AxisParityClass {
  int axis;
  std::vector<int> parity;  // parity[axis] is 0
  std::vector<std::size_t> edges;
};
std::vector<AxisParityClass> axis_parity_classes(const LatticeGraph& G);
std::size_t axis_parity_class_of(const LatticeGraph& G, std::size_t e);

}  // namespace gradflux
