#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gradflux/energy.hpp"
#include "gradflux/error.hpp"
#include "gradflux/experiment.hpp"
#include "gradflux/lattice.hpp"
#include "gradflux/potential.hpp"
#include "gradflux/sampler.hpp"

namespace py = pybind11;
using namespace gradflux;

namespace {

py::dict curve_dict(const TailCurve& c) {
  py::dict d;
  d["t"] = c.t;
  d["value"] = c.value;
  d["exponent_fit"] = c.exponent_fit;
  d["residual"] = c.residual;
  return d;
}

py::dict suite_dict(const SuiteReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["pass"] = r.pass;
  d["checks"] = r.checks;
  d["failures"] = r.failures;
  d["lines"] = r.lines;
  return d;
}

py::dict table_dict(const Table& t) {
  py::dict d;
  d["columns"] = t.columns;
  d["rows"] = t.rows;
  d["notes"] = t.notes;
  d["csv"] = csv_body(t);
  return d;
}

Manifest manifest_from(const py::dict& settings) {
  Manifest m;
  for (auto [k, v] : settings) set_manifest_value(m, py::str(k), py::str(v));
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gradient surface models: samplers, energy bounds and property checks";
  m.attr("__version__") = version();

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  py::class_<Potential>(m, "Potential")
      .def_static("quadratic", &Potential::quadratic)
      .def_static("power", &Potential::power, py::arg("p"))
      .def_static("power_plus_quadratic", &Potential::power_plus_quadratic, py::arg("p"))
      .def_static("absolute", &Potential::absolute, py::arg("half_width") = 60.0)
      .def_static("custom", &Potential::custom, py::arg("xs"), py::arg("values"))
      .def("__call__", &Potential::operator())
      .def("derivative", &Potential::derivative)
      .def("second_derivative", &Potential::second_derivative)
      .def("__repr__", &Potential::describe);

  m.def("second_order_ratio", [](const Potential& U, double s) { return second_order_ratio(U, s).value; },
        py::arg("U"), py::arg("s"));
  m.def("convexity_gap", [](const Potential& U, double r) { return convexity_gap(U, r).value; }, py::arg("U"),
        py::arg("r"));

  py::class_<LatticeGraph>(m, "LatticeGraph")
      .def_static("torus", [](int d, int L) { return LatticeGraph::torus(d, L); }, py::arg("d"), py::arg("L"))
      .def_static("box", [](int d, int L) { return LatticeGraph::box(d, L); }, py::arg("d"), py::arg("L"))
      .def_static(
          "custom",
          [](std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges, std::vector<std::size_t> boundary,
             std::vector<double> values) { return LatticeGraph::custom(n, std::move(edges), std::move(boundary), std::move(values)); },
          py::arg("n"), py::arg("edges"), py::arg("boundary") = std::vector<std::size_t>{},
          py::arg("values") = std::vector<double>{})
      .def_property_readonly("vertex_count", &LatticeGraph::vertex_count)
      .def_property_readonly("edge_count", &LatticeGraph::edge_count)
      .def_property_readonly("dimension", &LatticeGraph::dimension)
      .def_property_readonly("boundary", &LatticeGraph::boundary)
      .def("edges", [](const LatticeGraph& G) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& e : G.edges()) out.emplace_back(e.tail, e.head);
        return out;
      })
      .def("vertex_at", &LatticeGraph::vertex_at)
      .def("coordinates", &LatticeGraph::coordinates)
      .def("l1_norm", &LatticeGraph::l1_norm)
      .def("hash", &LatticeGraph::hash);

  m.def("diagonal_vertex", &diagonal_vertex, py::arg("T"), py::arg("k"));
  m.def("antipode", &antipode, py::arg("T"));

  m.def(
      "effective_conductance",
      [](const LatticeGraph& G, std::vector<double> w, std::vector<std::size_t> zero, std::vector<std::size_t> one) {
        if (w.empty()) w.assign(G.edge_count(), 1.0);
        return effective_conductance(G, w, zero, one);
      },
      py::arg("G"), py::arg("weights"), py::arg("zero_set"), py::arg("one_set"));
  m.def(
      "d_eta_t",
      [](const LatticeGraph& G, const Potential& U, const std::vector<double>& eta, double t) {
        return d_eta_t(G, U, eta, t).value;
      },
      py::arg("G"), py::arg("U"), py::arg("eta"), py::arg("t"));
  m.def(
      "dstar_exponent",
      [](int d, double p, const std::vector<double>& grid, std::size_t l) { return curve_dict(dstar_exponent(d, p, grid, l)); },
      py::arg("d"), py::arg("p"), py::arg("t_grid"), py::arg("l") = 40);
  m.def(
      "tail_bound",
      [](const LatticeGraph& G, const Potential& U, std::size_t v, const std::vector<double>& grid) {
        return curve_dict(tail_bound(G, U, v, grid));
      },
      py::arg("G"), py::arg("U"), py::arg("v"), py::arg("t_grid"));

  m.def(
      "sample",
      [](const LatticeGraph& G, const Potential& U, std::vector<std::size_t> vertices, std::size_t chains,
         std::size_t samples, std::uint64_t seed, std::size_t workers) {
        ChainConfig cfg;
        cfg.chains = chains;
        cfg.samples = samples;
        cfg.seed = seed;
        cfg.workers = workers;
        SampleStream s;
        {
          py::gil_scoped_release release;
          s = run_chains(G, U, cfg, vertices);
        }
        py::array_t<double> out({s.chains, s.per_chain, s.vertices.size()});
        auto view = out.mutable_unchecked<3>();
        for (std::size_t c = 0; c < s.chains; ++c)
          for (std::size_t k = 0; k < s.per_chain; ++k)
            for (std::size_t j = 0; j < s.vertices.size(); ++j)
              view(static_cast<py::ssize_t>(c), static_cast<py::ssize_t>(k), static_cast<py::ssize_t>(j)) = s.value(c, k, j);
        return out;
      },
      py::arg("G"), py::arg("U"), py::arg("vertices"), py::arg("chains") = 4, py::arg("samples") = 1000,
      py::arg("seed") = 1, py::arg("workers") = 1,
      "Samples of phi at the given vertices, shaped (chains, samples, vertices).");

  m.def("variance_scan", [](const py::dict& s) { return table_dict(variance_scan(manifest_from(s))); },
        py::arg("settings"), "Settings use the configuration keys, e.g. {'graph.d': 2, 'chain.seed': 3}.");
  m.def("tail_scan", [](const py::dict& s) { return table_dict(tail_scan(manifest_from(s))); }, py::arg("settings"));
  m.def("energy_bound_table", [](const py::dict& s) { return table_dict(energy_bound_table(manifest_from(s))); },
        py::arg("settings"));

  m.def("verify_isoperimetry", [] {
    py::list out;
    for (const auto& r : verify_isoperimetry()) out.append(suite_dict(r));
    return out;
  });
  m.def(
      "verify_logconcave",
      [](std::uint64_t seed, std::size_t instances) {
        py::list out;
        for (const auto& r : verify_logconcave({seed, instances})) out.append(suite_dict(r));
        return out;
      },
      py::arg("seed") = 1, py::arg("instances") = 50);
  m.def("connected_graph_count", [](std::size_t n) { return connected_graphs(n).size(); }, py::arg("n"));
}
