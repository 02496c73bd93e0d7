#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "gradflux/error.hpp"
#include "gradflux/experiment.hpp"

using namespace gradflux;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::optional<int> d, L;
  std::optional<std::string> kind, potential, t_grid;
  std::optional<double> p;
  std::optional<std::size_t> samples, chains, levels;
  std::string suite = "all";
};

void add_model_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--d", f.d, "lattice dimension");
  cmd->add_option("--L", f.L, "lattice size parameter");
  cmd->add_option("--kind", f.kind, "torus, box or custom")->check(CLI::IsMember({"torus", "box", "custom"}));
  cmd->add_option("--potential", f.potential, "quadratic, power, power_plus_quadratic, absolute or custom");
  cmd->add_option("--p", f.p, "exponent of power potentials");
  cmd->add_option("--samples", f.samples, "retained samples per chain");
  cmd->add_option("--chains", f.chains, "independent chains");
}

Manifest build_manifest(const std::string& command, const Flags& f, std::vector<double> default_grid) {
  Manifest m;
  m.command = command;
  m.t_grid = std::move(default_grid);
  if (!f.config.empty()) m = read_manifest_file(f.config, m);
  m.command = command;
  if (f.seed) m.chain.seed = *f.seed;
  if (f.workers) m.chain.workers = *f.workers;
  if (f.out) m.out_dir = *f.out;
  if (f.d) m.graph.d = *f.d;
  if (f.L) m.graph.L = *f.L;
  if (f.kind) set_manifest_value(m, "graph.kind", *f.kind);
  if (f.potential) set_manifest_value(m, "potential.name", *f.potential);
  if (f.p) m.potential.p = *f.p;
  if (f.t_grid) m.t_grid = parse_grid(*f.t_grid);
  if (f.samples) m.chain.samples = *f.samples;
  if (f.chains) m.chain.chains = *f.chains;
  if (f.levels) m.levels = *f.levels;
  return m;
}

int write_table(const Manifest& m, const Table& t) {
  std::filesystem::create_directories(m.out_dir);
  auto path = std::filesystem::path(m.out_dir) / (m.command + ".csv");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_csv(out, m, t);
  write_csv(std::cout, m, t);
  std::cerr << "wrote " << path.string() << '\n';
  return 0;
}

bool report(const SuiteReport& r) {
  std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " (" << r.checks << " checks, " << r.failures
            << " failures)\n";
  for (const auto& line : r.lines) std::cout << "  " << line << '\n';
  return r.pass;
}

int run_verify(const Flags& f) {
  std::uint64_t seed = f.seed.value_or(1);
  bool all = f.suite == "all", ok = true;
  if (all || f.suite == "logconcave")
    for (const auto& r : verify_logconcave({seed, 50})) ok &= report(r);
  if (all || f.suite == "isoperimetry")
    for (const auto& r : verify_isoperimetry()) ok &= report(r);
  if (all || f.suite == "energy") {
    EnergySuiteOptions o;
    o.seed = seed;
    ok &= report(verify_energy(o));
  }
  if (all || f.suite == "chessboard") {
    ChessboardSuiteOptions o;
    o.seed = seed;
    o.workers = f.workers.value_or(1);
    ok &= report(verify_chessboard(o));
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient surface experiments"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--workers", f.workers, "worker threads; results do not depend on it");
  app.add_option("--out", f.out, "output directory");

  auto* verify = app.add_subcommand("verify", "run the deterministic and Monte Carlo property suites");
  verify->add_option("suite", f.suite, "logconcave, isoperimetry, energy, chessboard or all")
      ->check(CLI::IsMember({"logconcave", "isoperimetry", "energy", "chessboard", "all"}));

  auto* variance = app.add_subcommand("variance-scan", "variance along the torus diagonal");
  add_model_flags(variance, f);

  auto* tail = app.add_subcommand("tail-scan", "empirical tails at the antipode against exp(-D(t))");
  add_model_flags(tail, f);
  tail->add_option("--t-grid", f.t_grid, "comma list or lo:hi:count");

  auto* energy = app.add_subcommand("energy-bound", "D(t), D*(t) and exponent fits");
  add_model_flags(energy, f);
  energy->add_option("--t-grid", f.t_grid, "comma list or lo:hi:count");
  energy->add_option("--levels", f.levels, "number of levels in the D* program");

  for (auto* cmd : {verify, variance, tail, energy}) cmd->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return run_verify(f);
    if (*variance) {
      auto m = build_manifest("variance-scan", f, {});
      return write_table(m, variance_scan(m));
    }
    if (*tail) {
      auto m = build_manifest("tail-scan", f, {0.5, 1.0, 1.5, 2.0});
      return write_table(m, tail_scan(m));
    }
    if (*energy) {
      auto m = build_manifest("energy-bound", f, {4, 8, 16, 32});
      return write_table(m, energy_bound_table(m));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
