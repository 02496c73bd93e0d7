#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gradflux/error.hpp"
#include "gradflux/io.hpp"

using namespace gradflux;

TEST_CASE("potential tables round trip") {
  std::istringstream in("# potential v1\n-2 4\n-1 1\n0 0\n1 1\n2 4\n");
  auto U = read_potential(in);
  CHECK(U(1.5) == doctest::Approx(2.5));
  CHECK(std::isinf(U(2.5)));
  std::ostringstream out;
  write_potential(out, U);
  std::istringstream back(out.str());
  auto V = read_potential(back);
  CHECK(V.table_u() == U.table_u());
  std::istringstream bad_header("# potential v2\n-1 1\n0 0\n1 1\n");
  CHECK_THROWS_AS(read_potential(bad_header), ParseError);
  std::istringstream not_convex("# potential v1\n-1 1\n0 2\n1 1\n");
  CHECK_THROWS_AS(read_potential(not_convex), ParseError);
  std::istringstream decreasing("# potential v1\n1 1\n0 0\n-1 1\n");
  CHECK_THROWS_AS(read_potential(decreasing), ParseError);
}

TEST_CASE("lattices round trip") {
  for (const auto& G : {LatticeGraph::torus(2, 2), LatticeGraph::box(3, 3),
                        LatticeGraph::custom(4, {{0, 1}, {1, 2}, {2, 3}}, {0, 3}, {0.5, -1.25})}) {
    std::ostringstream out;
    write_lattice(out, G);
    std::istringstream in(out.str());
    auto H = read_lattice(in);
    CHECK(H.hash() == G.hash());
    CHECK(H.kind() == G.kind());
  }
  std::istringstream bad("# lattice v1\nkind torus 2 4\nvertices 16\nedges 1\n0 1\nboundary 0\n");
  CHECK_THROWS_AS(read_lattice(bad), ParseError);
}

TEST_CASE("density grids round trip") {
  auto g = DensityGrid1D::from_log([](double s) { return 0.5 * s * s; }, -8, 8, 801);
  std::ostringstream out;
  write_density(out, g);
  std::istringstream in(out.str());
  auto h = read_density(in);
  REQUIRE(h.size() == g.size());
  // Reading renormalises, which may move the last bit.
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(h.values[k] == doctest::Approx(g.values[k]).epsilon(1e-14));
  CHECK(h.s_min == g.s_min);
  CHECK(h.h == g.h);
}

TEST_CASE("chain checkpoints resume bit for bit") {
  auto T = LatticeGraph::torus(2, 2);
  auto U = Potential::power(4);
  SurfaceState a(T, U, 5, 1);
  for (int k = 0; k < 50; ++k) a.sweep();
  std::stringstream buf;
  write_checkpoint(buf, a);
  for (int k = 0; k < 50; ++k) a.sweep();

  SurfaceState b(T, U, 999, 0);
  read_checkpoint(buf, b);
  CHECK(b.sweeps() == 50);
  for (int k = 0; k < 50; ++k) b.sweep();
  CHECK(a.phi() == b.phi());
  CHECK(a.sweeps() == b.sweeps());

  std::stringstream again;
  write_checkpoint(again, a);
  auto other = LatticeGraph::torus(2, 3);
  SurfaceState c(other, U, 1, 0);
  CHECK_THROWS_AS(read_checkpoint(again, c), ParseError);
}

TEST_CASE("sample and tail curve CSV") {
  auto G = LatticeGraph::custom(2, {{0, 1}}, {0});
  ChainConfig cfg;
  cfg.chains = 2;
  cfg.samples = 3;
  cfg.burn_in = 0;
  auto s = run_chains(G, Potential::quadratic(), cfg, {1});
  std::ostringstream out;
  write_samples_csv(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "chain,sweep,vertex,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);
  TailCurve c;
  c.t = {1, 2};
  c.value = {0.5, 0.25};
  fit_exponent(c);
  std::ostringstream tc;
  write_tail_curve_csv(tc, c);
  std::istringstream curve_rows(tc.str());
  std::getline(curve_rows, line);
  CHECK(line == "t,value,exponent_fit,residual");
  std::getline(curve_rows, line);
  CHECK(line.rfind("1,0.5,", 0) == 0);
  CHECK(std::stod(line.substr(6)) == doctest::Approx(-1.0));
}
