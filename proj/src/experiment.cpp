#include "gradflux/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gradflux/error.hpp"
#include "gradflux/io.hpp"
#include "gradflux/logconcave.hpp"

#ifndef GRADFLUX_VERSION
#define GRADFLUX_VERSION "0.0.0"
#endif

namespace gradflux {

std::string version() { return GRADFLUX_VERSION; }

namespace {

std::string fmt(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

std::string kind_name(GraphKind k) {
  switch (k) {
    case GraphKind::torus: return "torus";
    case GraphKind::box: return "box";
    case GraphKind::custom: return "custom";
  }
  return "custom";
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  auto s = text.data(), e = text.data() + text.size();
  while (s < e && *s == ' ') ++s;
  auto r = std::from_chars(s, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + fmt(xs[k]);
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> Manifest::entries() const {
  return {{"command", command},
          {"graph.kind", kind_name(graph.kind)},
          {"graph.d", std::to_string(graph.d)},
          {"graph.L", std::to_string(graph.L)},
          {"graph.file", graph.file},
          {"potential.name", potential.name},
          {"potential.p", fmt(potential.p)},
          {"potential.file", potential.file},
          {"chain.chains", std::to_string(chain.chains)},
          {"chain.burn_in", chain.burn_in ? std::to_string(*chain.burn_in) : "default"},
          {"chain.thinning", std::to_string(chain.thinning)},
          {"chain.samples", std::to_string(chain.samples)},
          {"chain.seed", std::to_string(chain.seed)},
          {"chain.scan", chain.scan == ScanOrder::systematic ? "systematic" : "random"},
          {"t_grid", join(t_grid)},
          {"levels", std::to_string(levels)},
          {"version", version()}};
}

void set_manifest_value(Manifest& m, const std::string& key, const std::string& value) {
  if (key == "command") {
    m.command = value;
  } else if (key == "graph.kind") {
    if (value == "torus") m.graph.kind = GraphKind::torus;
    else if (value == "box") m.graph.kind = GraphKind::box;
    else if (value == "custom") m.graph.kind = GraphKind::custom;
    else throw ConfigError("unknown graph kind " + value);
  } else if (key == "graph.d") {
    m.graph.d = parse_number<int>(key, value);
  } else if (key == "graph.L") {
    m.graph.L = parse_number<int>(key, value);
  } else if (key == "graph.file") {
    m.graph.file = value;
  } else if (key == "potential.name") {
    static const std::set<std::string> names{"quadratic", "power", "power_plus_quadratic", "absolute", "custom"};
    if (!names.count(value)) throw ConfigError("unknown potential " + value);
    m.potential.name = value;
  } else if (key == "potential.p") {
    m.potential.p = parse_number<double>(key, value);
  } else if (key == "potential.file") {
    m.potential.file = value;
  } else if (key == "chain.chains") {
    m.chain.chains = parse_number<std::size_t>(key, value);
  } else if (key == "chain.burn_in") {
    if (value == "default") m.chain.burn_in.reset();
    else m.chain.burn_in = parse_number<std::size_t>(key, value);
  } else if (key == "chain.thinning") {
    m.chain.thinning = parse_number<std::size_t>(key, value);
  } else if (key == "chain.samples") {
    m.chain.samples = parse_number<std::size_t>(key, value);
  } else if (key == "chain.seed") {
    m.chain.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "chain.scan") {
    if (value == "systematic") m.chain.scan = ScanOrder::systematic;
    else if (value == "random") m.chain.scan = ScanOrder::random;
    else throw ConfigError("unknown scan order " + value);
  } else if (key == "chain.workers") {
    m.chain.workers = parse_number<std::size_t>(key, value);
  } else if (key == "t_grid") {
    m.t_grid = parse_grid(value);
  } else if (key == "levels") {
    m.levels = parse_number<std::size_t>(key, value);
  } else if (key == "out_dir") {
    m.out_dir = value;
  } else if (key == "version") {
    // informational
  } else {
    throw ConfigError("unknown configuration key " + key);
  }
}

Manifest read_manifest(std::istream& in, Manifest base) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
  for (const auto& [name, node] : pt) {
    if (node.empty()) {
      set_manifest_value(base, name, node.data());
    } else {
      for (const auto& [key, leaf] : node) set_manifest_value(base, name + "." + key, leaf.data());
    }
  }
  return base;
}

Manifest read_manifest_file(const std::string& path, Manifest base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration " + path);
  return read_manifest(in, std::move(base));
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  auto colon = std::count(text.begin(), text.end(), ':');
  if (colon == 2) {
    auto a = text.find(':'), b = text.find(':', a + 1);
    auto lo = parse_number<double>("grid", text.substr(0, a));
    auto hi = parse_number<double>("grid", text.substr(a + 1, b - a - 1));
    auto n = parse_number<std::size_t>("grid", text.substr(b + 1));
    if (n < 2) throw ConfigError("grid needs at least two points");
    for (std::size_t k = 0; k < n; ++k) out.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1));
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(' ') == std::string::npos) continue;
    out.push_back(parse_number<double>("grid", item));
  }
  return out;
}

LatticeGraph build_graph(const GraphSpec& spec) {
  switch (spec.kind) {
    case GraphKind::torus: return LatticeGraph::torus(spec.d, spec.L);
    case GraphKind::box: return LatticeGraph::box(spec.d, spec.L);
    case GraphKind::custom:
      if (spec.file.empty()) throw ConfigError("custom graphs need graph.file");
      return load_lattice_file(spec.file);
  }
  throw ConfigError("unknown graph kind");
}

Potential build_potential(const PotentialSpec& spec) {
  if (spec.name == "quadratic") return Potential::quadratic();
  if (spec.name == "power") return Potential::power(spec.p);
  if (spec.name == "power_plus_quadratic") return Potential::power_plus_quadratic(spec.p);
  if (spec.name == "absolute") return Potential::absolute();
  if (spec.name == "custom") {
    if (spec.file.empty()) throw ConfigError("custom potentials need potential.file");
    return load_potential_file(spec.file);
  }
  throw ConfigError("unknown potential " + spec.name);
}

std::string csv_body(const Table& t) {
  std::string out;
  for (std::size_t k = 0; k < t.columns.size(); ++k) out += (k ? "," : "") + t.columns[k];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + fmt(row[k]);
    out += '\n';
  }
  return out;
}

void write_csv(std::ostream& out, const Manifest& m, const Table& t) {
  out << "# gradflux " << version() << '\n';
  for (const auto& [k, v] : m.entries()) out << "# " << k << " = " << v << '\n';
  for (const auto& note : t.notes) out << "# " << note << '\n';
  out << csv_body(t);
}

std::size_t diagonal_vertex(const LatticeGraph& T, int k) {
  if (T.kind() != GraphKind::torus) throw DomainError("diagonal rays are defined on tori");
  int d = T.dimension(), L = T.side() / 2;
  if (k < 0 || k > d * L) throw DomainError("diagonal distance out of range");
  std::vector<int> c(static_cast<std::size_t>(d), 0);
  for (int j = 0; j < k; ++j) ++c[static_cast<std::size_t>(j % d)];
  return T.vertex_at(c);
}

std::size_t antipode(const LatticeGraph& T) {
  return diagonal_vertex(T, T.dimension() * (T.side() / 2));
}

Table variance_scan(const Manifest& m) {
  if (m.graph.kind != GraphKind::torus) throw ConfigError("variance scans run on tori");
  auto T = build_graph(m.graph);
  auto U = build_potential(m.potential);
  int d = T.dimension(), L = T.side() / 2;
  std::vector<std::size_t> ray;
  for (int k = 1; k <= d * L; ++k) ray.push_back(diagonal_vertex(T, k));
  auto s = run_chains(T, U, m.chain, ray);
  Table t;
  t.columns = {"v", "l1", "var", "se", d == 2 ? "var_over_log" : "running_max"};
  double fitted = 0.0, running = 0.0;
  for (std::size_t v : ray) {
    auto e = variance_estimate(s, v);
    double l1 = T.l1_norm(v);
    double extra;
    if (d == 2) {
      extra = e.value / std::log1p(l1);
      fitted = std::max(fitted, extra);
    } else {
      running = std::max(running, e.value);
      extra = running;
    }
    t.rows.push_back({static_cast<double>(v), l1, e.value, e.se, extra});
  }
  if (d == 2)
    t.notes.push_back("fitted C in Var <= C log(1 + |v|_1): " + fmt(fitted));
  else
    t.notes.push_back("maximal variance along the ray: " + fmt(running));
  return t;
}

Table tail_scan(const Manifest& m) {
  auto G = build_graph(m.graph);
  auto U = build_potential(m.potential);
  if (m.t_grid.empty()) throw ConfigError("tail scans need t_grid");
  std::size_t v = G.kind() == GraphKind::torus ? antipode(G) : G.vertex_count() / 2;
  auto s = run_chains(G, U, m.chain, {v});
  auto tails = tail_estimate(s, v, m.t_grid);
  auto bound = tail_bound(G, U, v, m.t_grid);
  Table t;
  t.columns = {"t", "tail", "se", "bound", "violation"};
  std::size_t bad = 0;
  for (std::size_t k = 0; k < m.t_grid.size(); ++k) {
    bool viol = tails[k].value - 3 * tails[k].se > bound.value[k];
    bad += viol;
    t.rows.push_back({m.t_grid[k], tails[k].value, tails[k].se, bound.value[k], viol ? 1.0 : 0.0});
  }
  t.notes.push_back("vertex " + std::to_string(v) + ", violations beyond 3 SE: " + std::to_string(bad));
  return t;
}

Table energy_bound_table(const Manifest& m) {
  auto G = build_graph(m.graph);
  auto U = build_potential(m.potential);
  if (m.t_grid.empty()) throw ConfigError("energy bounds need t_grid");
  std::size_t v = G.kind() == GraphKind::torus ? antipode(G) : G.vertex_count() / 2;
  std::vector<double> eta(G.vertex_count(), 0.0);
  eta[v] = 1.0;
  TailCurve D;
  D.t = m.t_grid;
  for (double t : m.t_grid) D.value.push_back(d_eta_t(G, U, eta, t).value);
  bool positive = std::all_of(D.value.begin(), D.value.end(), [](double x) { return x > 0; });
  if (positive && D.t.size() > 1) fit_exponent(D);
  bool star = G.dimension() >= 3 && (m.potential.name == "power" || m.potential.name == "power_plus_quadratic") &&
              m.potential.p > 2;
  TailCurve S;
  if (star) S = dstar_exponent(G.dimension(), m.potential.p, m.t_grid, m.levels);
  Table t;
  t.columns = {"t", "D", "D_exponent_fit", "Dstar", "Dstar_exponent_fit"};
  for (std::size_t k = 0; k < m.t_grid.size(); ++k)
    t.rows.push_back({m.t_grid[k], D.value[k], D.exponent_fit, star ? S.value[k] : std::nan(""),
                      star ? S.exponent_fit : std::nan("")});
  t.notes.push_back("vertex " + std::to_string(v));
  if (star) t.notes.push_back("D* uses the analytic simplex program with l = " + std::to_string(m.levels));
  return t;
}

void SuiteReport::record(bool ok, const std::string& what) {
  ++checks;
  if (!ok) {
    ++failures;
    pass = false;
    if (lines.size() < 20) lines.push_back("FAIL " + what);
  }
}

namespace {

// Random one-dimensional log-concave density of family k % 4.
DensityGrid1D random_density(std::size_t k, Rng& rng) {
  auto U = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
  double mu = U(-1, 1);
  switch (k % 4) {
    case 0: {
      double sd = U(0.3, 3);
      return DensityGrid1D::from_log([=](double s) { return 0.5 * (s - mu) * (s - mu) / (sd * sd); },
                                     mu - 9.5 * sd, mu + 9.5 * sd, 4001);
    }
    case 1: {
      double a = U(0.2, 5), r = std::pow(45.0 / a, 0.25);
      return DensityGrid1D::from_log([=](double s) { return a * std::pow(s - mu, 4); }, mu - r, mu + r, 4001);
    }
    case 2: {
      double w = U(0.5, 3);
      return DensityGrid1D::from_log([](double) { return 0.0; }, mu, mu + w, 2001);
    }
    default: {
      double a = U(0.1, 1), b = U(0.05, 0.5), c = U(0.1, 2), nu = U(-0.5, 0.5);
      auto f = [=](double s) { return a * s * s + b * s * s * s * s + c * std::abs(s - nu); };
      double r = 1;
      while (f(r) < 45 || f(-r) < 45) r *= 1.25;
      return DensityGrid1D::from_log(f, -r, r, 4001);
    }
  }
}

struct RandomFunction {
  Grid1D grid;
  std::function<double(double)> log_f;  // log of the function on [lo, hi]
  double lo, hi;
};

RandomFunction random_function(std::size_t k, Rng& rng, double h) {
  auto U = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
  double mu = U(-2, 2), scale = U(0.5, 2);
  std::function<double(double)> f;
  double lo, hi;
  switch (k % 4) {
    case 0: f = [=](double s) { return 0.5 * (s - mu) * (s - mu) / (scale * scale); }; lo = mu - 9 * scale; hi = mu + 9 * scale; break;
    case 1: f = [=](double s) { return std::pow((s - mu) / scale, 4); }; lo = mu - 2.6 * scale; hi = mu + 2.6 * scale; break;
    case 2: f = [](double) { return 0.0; }; lo = mu; hi = mu + 2 * scale; break;
    default: f = [=](double s) { return std::abs(s - mu) / scale + 0.3 * (s - mu) * (s - mu); }; lo = mu - 12; hi = mu + 12; break;
  }
  auto n = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
  hi = lo + h * static_cast<double>(n - 1);
  double log_amp = std::log(U(0.5, 2));
  RandomFunction out{{}, [=](double s) { return log_amp - f(s); }, lo, hi};
  out.grid.s_min = lo;
  out.grid.h = h;
  for (std::size_t i = 0; i < n; ++i) out.grid.values.push_back(std::exp(out.log_f(lo + h * static_cast<double>(i))));
  return out;
}

// Sup-convolution F(z) = sup F1(x)^(1-l) F2(y)^l over (1-l) x + l y = z, on the
// grid of step h / q containing every combination of grid nodes. Each node
// takes the larger of the maximum over node pairs and a continuous maximum.
Grid1D sup_convolution(const RandomFunction& A, const RandomFunction& B, int p, int q) {
  const Grid1D &F1 = A.grid, &F2 = B.grid;
  double lam = static_cast<double>(p) / q;
  Grid1D F;
  F.s_min = (1 - lam) * F1.s_min + lam * F2.s_min;
  F.h = F1.h / q;
  std::size_t n = static_cast<std::size_t>(q - p) * (F1.size() - 1) + static_cast<std::size_t>(p) * (F2.size() - 1) + 1;
  std::vector<double> logF(n, -kInf);
  for (std::size_t i = 0; i < F1.size(); ++i)
    for (std::size_t j = 0; j < F2.size(); ++j) {
      std::size_t m = static_cast<std::size_t>(q - p) * i + static_cast<std::size_t>(p) * j;
      logF[m] = std::max(logF[m], (1 - lam) * A.log_f(F1.node(i)) + lam * B.log_f(F2.node(j)));
    }
  for (std::size_t m = 0; m < n; ++m) {
    double z = F.node(m);
    double xlo = std::max(A.lo, (z - lam * B.hi) / (1 - lam)), xhi = std::min(A.hi, (z - lam * B.lo) / (1 - lam));
    if (!(xlo < xhi)) continue;
    auto neg = [&](double x) {
      double y = std::clamp((z - (1 - lam) * x) / lam, B.lo, B.hi);
      return -((1 - lam) * A.log_f(x) + lam * B.log_f(y));
    };
    std::uintmax_t iters = 200;
    auto best = boost::math::tools::brent_find_minima(neg, xlo, xhi, 40, iters);
    logF[m] = std::max(logF[m], -best.second);
  }
  for (double v : logF) F.values.push_back(std::isinf(v) ? 0.0 : std::exp(v));
  return F;
}

LogConcaveDensity random_nd_density(std::size_t k, Rng& rng) {
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  auto U = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
  Mat M(2, 2);
  for (int i = 0; i < 4; ++i) M(i / 2, i % 2) = rng.normal();
  switch (k % 4) {
    case 0: return LogConcaveDensity::gaussian(M * M.transpose() + 0.3 * Mat::Identity(2, 2));
    case 1: {
      Mat A = 0.5 * M * M.transpose();
      Vec b = Vec::Zero(2), c(2);
      c << U(0.3, 2), U(0.3, 2);
      return LogConcaveDensity::polynomial(A, b, c);
    }
    case 2: {
      Vec lo(2), hi(2);
      lo << U(-1.5, -0.3), U(-1.5, -0.3);
      hi << U(0.3, 1.5), U(0.3, 1.5);
      return LogConcaveDensity::uniform_box(lo, hi);
    }
    default: {
      Mat A = 0.5 * M * M.transpose() + 0.2 * Mat::Identity(2, 2);
      Vec b(2), c(2), lo(2), hi(2);
      b << U(-0.5, 0.5), U(-0.5, 0.5);
      c << U(0.1, 1), U(0.1, 1);
      lo << U(-2, -0.5), U(-2, -0.5);
      hi << U(0.5, 2), U(0.5, 2);
      return LogConcaveDensity::polynomial(A, b, c, std::make_pair(lo, hi));
    }
  }
}

Eigen::VectorXd random_unit(Rng& rng) {
  double a = 2 * 3.14159265358979323846 * rng.uniform();
  Eigen::VectorXd u(2);
  u << std::cos(a), std::sin(a);
  return u;
}

std::string describe_check(const std::string& what, const CheckReport& r) {
  std::ostringstream ss;
  ss.precision(10);
  ss << what << ": lhs " << r.lhs << " rhs " << r.rhs << " tol " << r.tolerance;
  return ss.str();
}

}  // namespace

std::vector<SuiteReport> verify_logconcave(const LogconcaveSuiteOptions& options) {
  SuiteReport prop{"one-dimensional level probability bound"};
  SuiteReport tail{"curvature tail for C in {4, 8, 16}"};
  SuiteReport quant{"quantitative log-concavity inequality"};
  SuiteReport maxd{"maximal marginal density bound"};
  SuiteReport pl{"one-dimensional Prekopa-Leindler"};
  Rng rng(options.seed, 101);
  for (std::size_t k = 0; k < options.instances; ++k) {
    auto alpha = random_density(k, rng);
    auto r = check_prop21(alpha);
    prop.record(r.tail.pass, describe_check("instance " + std::to_string(k), r.tail));
    for (double C : {4.0, 8.0, 16.0}) {
      auto c = check_second_derivative_tail(alpha, C);
      tail.record(c.pass, describe_check("instance " + std::to_string(k) + " C " + std::to_string(C), c));
    }
  }
  for (std::size_t k = 0; k < options.instances; ++k) {
    auto rho = random_nd_density(k, rng);
    auto eta = random_unit(rng);
    double t = 0.2 + rng.uniform();
    auto alpha = marginal_density(rho, eta);
    double s = density_quantile(alpha, 0.2 + 0.6 * rng.uniform());
    double D = rng.uniform() * t * t;
    std::string label = rho.describe() + " instance " + std::to_string(k);
    try {
      auto q = check_quantitative_logconcavity(rho, eta, s, t, D);
      quant.record(q.pass, describe_check(label, q));
    } catch (const Error& e) {
      quant.record(false, label + ": " + e.what());
    }
    auto n = random_unit(rng);
    double tm = 0.05 + 3 * rng.uniform();
    try {
      auto a = check_lemma_app_main(rho, n, tm);
      maxd.record(a.pass, describe_check(label, a));
    } catch (const Error& e) {
      maxd.record(false, label + ": " + e.what());
    }
  }
  const std::pair<int, int> lambdas[] = {{1, 4}, {1, 3}, {1, 2}, {2, 3}, {3, 4}};
  for (std::size_t k = 0; k < options.instances; ++k) {
    double h = 0.02 + 0.02 * rng.uniform();
    auto F1 = random_function(k, rng, h);
    auto F2 = random_function(k / 4 + k, rng, h);
    auto [p, q] = lambdas[k % 5];
    auto F = sup_convolution(F1, F2, p, q);
    std::string label = "instance " + std::to_string(k);
    try {
      auto r = prekopa_leindler_check(F1.grid, F2.grid, F, static_cast<double>(p) / q);
      pl.record(r.pass, describe_check(label, r));
    } catch (const Error& e) {
      pl.record(false, label + ": " + e.what());
    }
  }
  return {prop, tail, quant, maxd, pl};
}

std::vector<SuiteReport> verify_isoperimetry() {
  SuiteReport iso{"box isoperimetry over all subsets"};
  for (auto [d, L] : {std::pair{2, 3}, std::pair{3, 2}, std::pair{2, 2}}) {
    auto r = verify_box_isoperimetry(d, L);
    std::ostringstream ss;
    ss << "d=" << d << " L=" << L << ": " << r.scanned << " subsets, " << r.checked << " checked, "
       << r.violations << " violations, min slack " << r.min_slack;
    iso.record(r.violations == 0, ss.str());
    iso.lines.push_back(ss.str());
  }
  SuiteReport conn{"boundary connectivity of connected cuts"};
  for (int L : {2, 3}) {
    auto B = LatticeGraph::box(2, L);
    auto cuts = connected_cuts(B);
    std::size_t bad = 0;
    for (auto X : cuts) {
      bool ok = boundary_connectivity_check(B, from_mask(X));
      bad += !ok;
      conn.record(ok, "L=" + std::to_string(L) + " X mask " + std::to_string(X));
    }
    conn.lines.push_back("L=" + std::to_string(L) + ": " + std::to_string(cuts.size()) + " connected cuts, " +
                         std::to_string(bad) + " disconnected boundaries");
  }
  return {iso, conn};
}

std::vector<LatticeGraph> connected_graphs(std::size_t n) {
  if (n < 1 || n > 7) throw SizeError("graph enumeration supports 1..7 vertices");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  std::vector<std::vector<std::size_t>> index(n, std::vector<std::size_t>(n, 0));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    index[pairs[k].first][pairs[k].second] = k;
    index[pairs[k].second][pairs[k].first] = k;
  }
  std::vector<std::vector<std::size_t>> perms;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do perms.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));

  std::set<std::uint64_t> seen;
  std::vector<LatticeGraph> out;
  std::uint64_t total = std::uint64_t{1} << pairs.size();
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    std::vector<VertexMask> adj(n, 0);
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if (mask >> k & 1) {
        adj[pairs[k].first] |= VertexMask{1} << pairs[k].second;
        adj[pairs[k].second] |= VertexMask{1} << pairs[k].first;
      }
    VertexMask all = (VertexMask{1} << n) - 1;
    if (!mask_connected(adj, all)) continue;
    std::uint64_t canon = ~std::uint64_t{0};
    for (const auto& p : perms) {
      std::uint64_t img = 0;
      for (std::size_t k = 0; k < pairs.size(); ++k)
        if (mask >> k & 1) img |= std::uint64_t{1} << index[p[pairs[k].first]][p[pairs[k].second]];
      canon = std::min(canon, img);
    }
    if (!seen.insert(canon).second) continue;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if (canon >> k & 1) edges.push_back(pairs[k]);
    out.push_back(LatticeGraph::custom(n, edges));
  }
  return out;
}

SuiteReport verify_energy(const EnergySuiteOptions& options) {
  SuiteReport rep{"energy sandwich on small connected graphs"};
  const std::pair<const char*, Potential> potentials[] = {
      {"x^2", Potential::quadratic()}, {"x^4", Potential::power(4)}, {"|x|", Potential::absolute()}};
  Rng rng(options.seed, 202);
  double worst = kInf;
  std::size_t graphs = 0;
  for (std::size_t n = 2; n <= options.max_vertices; ++n) {
    for (const auto& G : connected_graphs(n)) {
      ++graphs;
      auto cuts = connected_cuts(G);
      std::vector<std::pair<std::size_t, std::size_t>> ordered;
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          if (a != b) ordered.emplace_back(a, b);
      for (std::size_t k = 0; k + 1 < ordered.size(); ++k) {
        auto j = k + static_cast<std::size_t>(rng.uniform() * static_cast<double>(ordered.size() - k));
        std::swap(ordered[k], ordered[std::min(j, ordered.size() - 1)]);
      }
      ordered.resize(std::min(options.pairs, ordered.size()));
      for (auto [a, b] : ordered) {
        SimplexBoundProblem P{isoperimetry_profile(G, a, cuts), isoperimetry_profile(G, b, cuts),
                              Potential::quadratic(), 1.0};
        for (const auto& [name, U] : potentials) {
          P.U = U;
          std::ostringstream ss;
          ss.precision(12);
          ss << "n=" << n << " edges=" << G.edge_count() << " hash=" << G.hash() << " (" << a << "," << b
             << ") U=" << name;
          try {
            double lhs = direct_energy_infimum(G, U, a, b).value;
            double rhs = simplex_energy_bound(P).value;
            worst = std::min(worst, lhs - rhs);
            ss << ": direct " << lhs << " simplex " << rhs;
            rep.record(lhs >= rhs - options.slack, ss.str());
          } catch (const Error& e) {
            rep.record(false, ss.str() + ": " + e.what());
          }
        }
      }
    }
  }
  std::ostringstream ss;
  ss << graphs << " graphs, " << rep.checks << " checks, min(direct - simplex) = " << worst;
  rep.lines.insert(rep.lines.begin(), ss.str());
  return rep;
}

SuiteReport verify_chessboard(const ChessboardSuiteOptions& options) {
  SuiteReport rep{"chessboard estimate on the 4x4 torus"};
  auto T = LatticeGraph::torus(2, 2);
  auto U = Potential::quadratic();
  auto classes = axis_parity_classes(T);
  Rng rng(options.seed, 303);
  for (std::size_t k = 0; k < options.pairs; ++k) {
    const auto& cls = classes[static_cast<std::size_t>(rng.uniform() * static_cast<double>(classes.size()))].edges;
    std::vector<std::size_t> E0;
    while (E0.empty())
      for (std::size_t e : cls)
        if (rng.uniform() < 0.5) E0.push_back(e);
    // Sets on |grad phi| with per-edge probability well inside (0, 1), so that
    // the class event is not too rare to estimate.
    IntervalUnion S;
    double a = 0.05 + 0.25 * rng.uniform(), b = a + 0.2 + 0.4 * rng.uniform();
    switch (k % 3) {
      case 0: S = {{a, kInf}}; break;
      case 1: S = {{0.0, b + 0.2}}; break;
      default: S = {{0.0, a}, {b, kInf}}; break;
    }
    ChainConfig cfg;
    cfg.chains = options.chains;
    cfg.samples = options.samples;
    cfg.seed = options.seed * 1000 + k;
    cfg.workers = options.workers;
    auto r = chessboard_check(T, U, cfg, E0, S);
    std::ostringstream ss;
    ss.precision(6);
    ss << "pair " << k << ": |E0| = " << E0.size() << "/" << cls.size() << ", Pr(E0) = " << r.lhs
       << ", Pr(class)^ratio = " << r.rhs << ", combined SE " << r.combined_se;
    rep.record(r.pass, ss.str());
    rep.lines.push_back(ss.str());
  }
  return rep;
}

}  // namespace gradflux
