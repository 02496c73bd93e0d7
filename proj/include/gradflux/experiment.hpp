#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gradflux/energy.hpp"
#include "gradflux/lattice.hpp"
#include "gradflux/potential.hpp"
#include "gradflux/sampler.hpp"

namespace gradflux {

std::string version();

struct GraphSpec {
  GraphKind kind = GraphKind::torus;
  int d = 2;
  int L = 4;
  std::string file;  // lattice v1 file for custom graphs
};

struct PotentialSpec {
  std::string name = "quadratic";  // quadratic, power, power_plus_quadratic, absolute, custom
  double p = 4.0;
  std::string file;  // potential v1 file for custom
};

/// Everything that determines a run. Serialised into every output header.
struct Manifest {
  std::string command;
  GraphSpec graph;
  PotentialSpec potential;
  ChainConfig chain;
  std::vector<double> t_grid;
  std::size_t levels = 40;
  std::string out_dir = ".";
  std::uint64_t seed() const { return chain.seed; }

  // key = value pairs in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

// Reads key = value lines; a [section] header prefixes the keys below it, so
// [graph] d = 3 sets graph.d. ConfigError on unknown keys or bad values.
Manifest read_manifest(std::istream& in, Manifest base = {});
Manifest read_manifest_file(const std::string& path, Manifest base = {});
void set_manifest_value(Manifest& m, const std::string& key, const std::string& value);

LatticeGraph build_graph(const GraphSpec& spec);
Potential build_potential(const PotentialSpec& spec);
std::vector<double> parse_grid(const std::string& text);

/// Numeric table written as CSV behind a '#'-prefixed manifest header.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> notes;  // extra header lines
};
void write_csv(std::ostream& out, const Manifest& m, const Table& t);
// Body only: the lines after the header.
std::string csv_body(const Table& t);

// Var(phi(v)) along the diagonal ray of a torus; d = 2 adds Var / log(1 + |v|_1),
// d >= 3 the running maximum.
Table variance_scan(const Manifest& m);
// Empirical Pr(|phi(v)| > t) at the antipode against exp(-D(t)).
Table tail_scan(const Manifest& m);
// D(t) at the antipode and D*(t) with exponent fits.
Table energy_bound_table(const Manifest& m);

// Vertex of the torus diagonal at l1 distance about k from the origin.
std::size_t diagonal_vertex(const LatticeGraph& T, int k);
std::size_t antipode(const LatticeGraph& T);

struct SuiteReport {
  explicit SuiteReport(std::string n = {}) : name(std::move(n)) {}
  std::string name;
  bool pass = true;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::vector<std::string> lines;  // summary and failing witnesses
  void record(bool ok, const std::string& what);
};

struct LogconcaveSuiteOptions {
  std::uint64_t seed = 1;
  std::size_t instances = 50;
};
// The level probability bound, the curvature tail for C in {4, 8, 16}, the quantitative
// log-concavity inequality, the maximal marginal bound and Prekopa-Leindler,
// each over randomised instances.
std::vector<SuiteReport> verify_logconcave(const LogconcaveSuiteOptions& options = {});

// Box isoperimetry over all subsets and boundary connectivity of every
// connected cut of the small boxes.
std::vector<SuiteReport> verify_isoperimetry();

struct EnergySuiteOptions {
  std::size_t max_vertices = 6;
  std::size_t pairs = 3;
  double slack = 1e-8;
  std::uint64_t seed = 1;
};
// direct energy infimum >= simplex bound on every connected graph up to
// isomorphism, for x^2, x^4 and |x|.
SuiteReport verify_energy(const EnergySuiteOptions& options = {});

// Connected graphs on n vertices, one per isomorphism class.
std::vector<LatticeGraph> connected_graphs(std::size_t n);

struct ChessboardSuiteOptions {
  std::uint64_t seed = 1;
  std::size_t pairs = 5;
  std::size_t samples = 25000;
  std::size_t chains = 4;
  std::size_t workers = 1;
};
SuiteReport verify_chessboard(const ChessboardSuiteOptions& options = {});

}  // namespace gradflux
