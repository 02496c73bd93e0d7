#include "gradflux/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gradflux/error.hpp"

namespace gradflux {

namespace {

std::string fmt(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

// Next line that is neither blank nor a comment other than the header.
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '#') continue;
    line = line.substr(p);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    return true;
  }
  return false;
}

void expect_header(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input, expected '" + header + "'");
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  if (line != header) throw ParseError("expected header '" + header + "', got '" + line + "'");
}

template <class T>
T field(std::istringstream& ss, const char* what) {
  T v;
  if (!(ss >> v)) throw ParseError(std::string("could not read ") + what);
  return v;
}

std::string keyword_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!next_line(in, line)) throw ParseError("missing section '" + key + "'");
  if (line.rfind(key, 0) != 0) throw ParseError("expected section '" + key + "', got '" + line + "'");
  return line.substr(key.size());
}

}  // namespace

Potential read_potential(std::istream& in) {
  expect_header(in, "# potential v1");
  std::vector<double> xs, us;
  std::string line;
  while (next_line(in, line)) {
    std::istringstream ss(line);
    xs.push_back(field<double>(ss, "x"));
    us.push_back(field<double>(ss, "U(x)"));
    std::string extra;
    if (ss >> extra) throw ParseError("trailing data on potential row: " + line);
  }
  for (std::size_t k = 1; k < xs.size(); ++k)
    if (!(xs[k] > xs[k - 1])) throw ParseError("x must be strictly increasing");
  try {
    return Potential::custom(std::move(xs), std::move(us));
  } catch (const DomainError& e) {
    throw ParseError(std::string("invalid potential table: ") + e.what());
  }
}

void write_potential(std::ostream& out, const Potential& U) {
  if (U.kind() != Potential::Kind::custom) throw DomainError("only tabulated potentials are written as tables");
  out << "# potential v1\n";
  for (std::size_t k = 0; k < U.table_x().size(); ++k) out << fmt(U.table_x()[k]) << ' ' << fmt(U.table_u()[k]) << '\n';
}

LatticeGraph read_lattice(std::istream& in) {
  expect_header(in, "# lattice v1");
  std::istringstream kind(keyword_line(in, "kind"));
  auto name = field<std::string>(kind, "graph kind");
  int d = 0, side = 0;
  if (name == "torus" || name == "box") {
    d = field<int>(kind, "dimension");
    side = field<int>(kind, "side");
  } else if (name != "custom") {
    throw ParseError("unknown graph kind " + name);
  }
  std::istringstream vs(keyword_line(in, "vertices"));
  auto n = field<std::size_t>(vs, "vertex count");
  std::istringstream es(keyword_line(in, "edges"));
  auto m = field<std::size_t>(es, "edge count");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::string line;
  for (std::size_t k = 0; k < m; ++k) {
    if (!next_line(in, line)) throw ParseError("truncated edge list");
    std::istringstream ss(line);
    auto a = field<std::size_t>(ss, "tail");
    auto b = field<std::size_t>(ss, "head");
    edges.emplace_back(a, b);
  }
  std::istringstream bs(keyword_line(in, "boundary"));
  auto nb = field<std::size_t>(bs, "boundary count");
  std::vector<std::size_t> boundary;
  std::vector<double> values;
  for (std::size_t k = 0; k < nb; ++k) {
    if (!next_line(in, line)) throw ParseError("truncated boundary list");
    std::istringstream ss(line);
    boundary.push_back(field<std::size_t>(ss, "boundary vertex"));
    values.push_back(field<double>(ss, "boundary value"));
  }
  try {
    if (name == "custom") return LatticeGraph::custom(n, edges, boundary, values);
    if (name == "torus" && side % 2 != 0) throw ParseError("torus side must be even");
    auto G = name == "torus" ? LatticeGraph::torus(d, side / 2) : LatticeGraph::box(d, side);
    if (G.vertex_count() != n || G.edge_count() != m) throw ParseError("lattice size does not match its kind");
    for (std::size_t k = 0; k < m; ++k)
      if (G.edge(k).tail != edges[k].first || G.edge(k).head != edges[k].second)
        throw ParseError("edge list does not match the canonical orientation");
    return G.with_boundary(boundary, values);
  } catch (const DomainError& e) {
    throw ParseError(std::string("invalid lattice: ") + e.what());
  } catch (const SizeError& e) {
    throw ParseError(std::string("invalid lattice: ") + e.what());
  }
}

void write_lattice(std::ostream& out, const LatticeGraph& G) {
  out << "# lattice v1\n";
  switch (G.kind()) {
    case GraphKind::torus: out << "kind torus " << G.dimension() << ' ' << G.side() << '\n'; break;
    case GraphKind::box: out << "kind box " << G.dimension() << ' ' << G.side() << '\n'; break;
    case GraphKind::custom: out << "kind custom\n"; break;
  }
  out << "vertices " << G.vertex_count() << '\n';
  out << "edges " << G.edge_count() << '\n';
  for (const auto& e : G.edges()) out << e.tail << ' ' << e.head << '\n';
  out << "boundary " << G.boundary().size() << '\n';
  for (std::size_t v : G.boundary()) out << v << ' ' << fmt(G.boundary_value(v)) << '\n';
  if (G.has_coordinates()) {
    out << "# coordinates\n";
    for (std::size_t v = 0; v < G.vertex_count(); ++v) {
      out << "# " << v;
      for (int c : G.coordinates(v)) out << ' ' << c;
      out << '\n';
    }
  }
}

DensityGrid1D read_density(std::istream& in) {
  expect_header(in, "# density v1");
  std::string line;
  if (!next_line(in, line)) throw ParseError("missing density grid line");
  std::istringstream ss(line);
  auto s_min = field<double>(ss, "s_min");
  auto h = field<double>(ss, "h");
  auto n = field<std::size_t>(ss, "count");
  std::vector<double> values;
  while (next_line(in, line)) {
    std::istringstream vs(line);
    values.push_back(field<double>(vs, "density value"));
  }
  if (values.size() != n) throw ParseError("density value count mismatch");
  try {
    return DensityGrid1D::from_values(s_min, h, std::move(values));
  } catch (const GridError& e) {
    throw ParseError(std::string("invalid density: ") + e.what());
  }
}

void write_density(std::ostream& out, const DensityGrid1D& alpha) {
  out << "# density v1\n" << fmt(alpha.s_min) << ' ' << fmt(alpha.h) << ' ' << alpha.size() << '\n';
  for (double v : alpha.values) out << fmt(v) << '\n';
}

void write_checkpoint(std::ostream& out, const SurfaceState& state) {
  out << "# chain v1\n";
  out << "graph " << state.graph().hash() << '\n';
  out << "sweeps " << state.sweeps() << '\n';
  out << "rng " << state.rng().engine() << '\n';
  const auto& phi = state.phi();
  out << "phi " << phi.size() << '\n';
  for (double x : phi) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xffu);
    out.write(bytes, 8);
  }
}

void read_checkpoint(std::istream& in, SurfaceState& state) {
  expect_header(in, "# chain v1");
  std::string line;
  auto section = [&](const std::string& key) {
    if (!std::getline(in, line) || line.rfind(key + " ", 0) != 0) throw ParseError("checkpoint: missing " + key);
    return std::istringstream(line.substr(key.size() + 1));
  };
  auto gs = section("graph");
  if (field<std::uint64_t>(gs, "graph hash") != state.graph().hash())
    throw ParseError("checkpoint belongs to a different graph");
  auto ss = section("sweeps");
  auto sweeps = field<std::uint64_t>(ss, "sweep counter");
  auto rs = section("rng");
  std::mt19937_64 engine;
  if (!(rs >> engine)) throw ParseError("checkpoint: bad RNG state");
  auto ps = section("phi");
  auto n = field<std::size_t>(ps, "vertex count");
  if (n != state.graph().vertex_count()) throw ParseError("checkpoint: vertex count mismatch");
  std::vector<double> phi(n);
  for (auto& x : phi) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("checkpoint: truncated configuration");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    x = std::bit_cast<double>(bits);
  }
  try {
    state.set_phi(std::move(phi));
  } catch (const DomainError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  state.set_sweeps(sweeps);
  state.rng().engine() = engine;
}

void write_samples_csv(std::ostream& out, const SampleStream& s) {
  out << "chain,sweep,vertex,value\n";
  for (std::size_t c = 0; c < s.chains; ++c)
    for (std::size_t k = 0; k < s.per_chain; ++k)
      for (std::size_t j = 0; j < s.vertices.size(); ++j)
        out << c << ',' << s.sweep[k] << ',' << s.vertices[j] << ',' << fmt(s.value(c, k, j)) << '\n';
}

void write_tail_curve_csv(std::ostream& out, const TailCurve& curve) {
  out << "t,value,exponent_fit,residual\n";
  for (std::size_t k = 0; k < curve.t.size(); ++k)
    out << fmt(curve.t[k]) << ',' << fmt(curve.value[k]) << ',' << fmt(curve.exponent_fit) << ','
        << fmt(curve.residual) << '\n';
}

Potential load_potential_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_potential(in);
}

LatticeGraph load_lattice_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_lattice(in);
}

}  // namespace gradflux
