// Batch front-end: JSON in, JSON/CSV out.
//
// Exit codes: 0 success, 1 refusal or failed check (JSON report on stdout),
// 2 usage error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qgraph/couplings.hpp"
#include "qgraph/fdm.hpp"
#include "qgraph/generators.hpp"
#include "qgraph/io.hpp"
#include "qgraph/propagator.hpp"

using namespace qgraph;

namespace {

struct RunConfig {
  std::string graph, data, couplings, out;
  std::optional<int> random_p;
  std::uint64_t seed = 1;
  double tau_max = 20.0;
  int nodes = 0;
  double delta = 0.5, eps = 0.05;
  std::vector<double> times;
  double h = 1.0 / 64.0, dt = 1.0 / 128.0;
  std::optional<double> trunc;
  std::optional<double> omega_max;
  std::optional<double> tau_cut;
  double tol = 1e-2;
};

// Thrown to stop with exit code 1 after the report is printed.
struct Refusal {
  json report;
};

MetricTree load_tree(const RunConfig& c) {
  if (c.random_p) return random_tree(c.seed, *c.random_p);
  if (c.graph.empty()) throw CLI::RequiredError("--graph");
  return tree_from_json(read_json_file(c.graph));
}

GraphFunction load_data(const RunConfig& c) {
  if (c.data.empty()) throw CLI::RequiredError("--data");
  return function_from_json(read_json_file(c.data));
}

void emit(const RunConfig& c, const json& j) {
  if (c.out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw GraphError("cannot write " + c.out);
  f << j.dump(2) << "\n";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw GraphError("cannot write " + path);
  return f;
}

SpectralData bound_states(const MetricTree& t, const RunConfig& c) {
  bool negative = false;
  for (const Vertex& v : t.vertices()) negative = negative || v.alpha < 0.0;
  if (!negative) return {};
  SpectrumOptions o;
  o.omega_max = c.omega_max;
  return find_eigenvalues(t, o);
}

std::vector<SamplePoint> sample_grid(const MetricTree& t, int n, double ray_window) {
  std::vector<SamplePoint> s;
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    const double len = t.edge(e).infinite() ? ray_window : t.edge(e).length;
    for (int j = 0; j < n; ++j) s.push_back(SamplePoint{e, len * j / (n - 1)});
  }
  return s;
}

int cmd_validate(const RunConfig& c) {
  const ValidationReport r = validate_tree(load_tree(c));
  if (!r.valid()) throw Refusal{to_json(r)};
  emit(c, to_json(r));
  return 0;
}

int cmd_spectrum(const RunConfig& c) {
  const MetricTree t = load_tree(c);
  SpectrumOptions o;
  o.omega_max = c.omega_max;
  emit(c, to_json(find_eigenvalues(t, o), t));
  return 0;
}

int cmd_resonance(const RunConfig& c) {
  const ResonanceReport r = dispersive_condition(load_tree(c), c.nodes > 0 ? c.nodes : 2048);
  if (!r.condition_holds) throw Refusal{to_json(r)};
  emit(c, to_json(r));
  return 0;
}

int cmd_strip_scan(const RunConfig& c) {
  StripGrid g;
  g.delta = c.delta;
  g.eps = c.eps;
  g.tau_max = c.tau_max;
  if (c.nodes > 0) g.n_tau = c.nodes;
  const ScanReport r = strip_scan(load_tree(c), g);
  if (r.violation) throw Refusal{to_json(r)};
  emit(c, to_json(r));
  return 0;
}

int cmd_appendix_a(const RunConfig& c) {
  const PropertyReport r = appendix_a_checks(load_tree(c));
  if (!r.all_hold) throw Refusal{to_json(r)};
  emit(c, to_json(r));
  return 0;
}

int cmd_evolve(const RunConfig& c) {
  EvolutionRequest req;
  req.tree = load_tree(c);
  req.u0 = StateFunction{load_data(c), {}};
  req.times = c.times.empty() ? std::vector<double>{0.5, 1.0, 2.0} : c.times;
  req.samples = sample_grid(req.tree, c.nodes > 1 ? c.nodes : 201, c.trunc.value_or(20.0));
  req.quad.tau_max = c.tau_cut;
  const EvolutionResult res = evolve_full(req, bound_states(req.tree, c));
  if (c.out.empty()) {
    write_samples_csv(std::cout, req.tree, res);
  } else {
    auto f = open_out(c.out);
    write_samples_csv(f, req.tree, res);
  }
  return 0;
}

int cmd_decay(const RunConfig& c) {
  const MetricTree t = load_tree(c);
  const std::vector<double> times = c.times.empty() ? std::vector<double>{1, 2, 5, 10, 20, 50, 100} : c.times;
  emit(c, to_json(decay_scan(t, load_data(c), times, c.nodes > 0 ? c.nodes : 400)));
  return 0;
}

int cmd_oracle_compare(const RunConfig& c) {
  const MetricTree t = load_tree(c);
  OracleOptions o;
  o.h = c.h;
  o.dt = c.dt;
  o.ray_length = c.trunc;
  const std::vector<double> times = c.times.empty() ? std::vector<double>{0.5, 1.0, 2.0} : c.times;
  const OracleComparison r = oracle_compare(t, load_data(c), times, o);
  if (!c.out.empty()) {
    auto fp = open_out(c.out + ".propagator.csv");
    write_samples_csv(fp, t, r.propagator);
    auto fc = open_out(c.out + ".cn.csv");
    write_samples_csv(fc, t, r.oracle);
  }
  json j{{"times", r.times}, {"rel_l2", r.rel_l2}, {"max_rel_l2", r.max_rel_l2}, {"tolerance", c.tol},
         {"within_tolerance", r.max_rel_l2 <= c.tol}, {"h", c.h}, {"dt", c.dt}, {"ray_length", r.ray_length},
         {"window", r.window}, {"horizon", r.horizon}, {"cn_mass_drift", r.mass_drift}};
  if (r.max_rel_l2 > c.tol) throw Refusal{j};
  std::cout << j.dump(2) << "\n";
  return 0;
}

CouplingSpec load_couplings(const RunConfig& c) {
  return c.couplings.empty() ? CouplingSpec{} : couplings_from_json(read_json_file(c.couplings));
}

int cmd_couplings_check(const RunConfig& c) {
  if (c.couplings.empty()) throw CLI::RequiredError("--couplings");
  const CouplingSpec spec = load_couplings(c);
  std::optional<MetricTree> t;
  if (!c.graph.empty() || c.random_p) t = load_tree(c);
  json j = json::object();
  bool ok = true;
  for (const auto& [id, cp] : spec) {
    json v;
    MatrixR A = cp.A, B = cp.B;
    if (cp.kind == Coupling::Kind::Delta) {
      if (!t || !t->has_vertex(id)) {
        v = {{"ok", false}, {"error", "delta coupling needs the vertex degree from --graph"}};
        ok = false;
        j[std::to_string(id)] = v;
        continue;
      }
      std::tie(A, B) = delta_matrices(static_cast<int>(t->degree(t->vertex_index(id))), cp.alpha);
    }
    const SelfAdjointReport r = check_self_adjoint(A, B);
    v = to_json(r);
    if (t) {
      if (!t->has_vertex(id)) {
        v["ok"] = false;
        v["error"] = "no such vertex";
      } else if (static_cast<Eigen::Index>(t->degree(t->vertex_index(id))) != A.rows()) {
        v["ok"] = false;
        v["error"] = "size differs from the vertex degree";
      }
    }
    ok = ok && v["ok"].get<bool>();
    j[std::to_string(id)] = v;
  }
  if (!ok) throw Refusal{j};
  emit(c, j);
  return 0;
}

int cmd_couplings_scan(const RunConfig& c) {
  const ConditionScan r = sufficient_condition_scan(load_tree(c), load_couplings(c), c.tau_max, c.nodes > 0 ? c.nodes : 4000);
  if (!r.plausible) throw Refusal{to_json(r)};
  emit(c, to_json(r));
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schroedinger evolution on delta-coupled metric trees"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto graph_opts = [&](CLI::App* s) {
    s->add_option("--graph", cfg.graph, "graph spec (JSON)")->check(CLI::ExistingFile);
    s->add_option("--random", cfg.random_p, "use a random tree with this many vertices instead of --graph")->check(CLI::Range(1, 50));
    s->add_option("--seed", cfg.seed, "seed for --random");
    s->add_option("--out", cfg.out, "output path");
  };
  auto data_opt = [&](CLI::App* s) { s->add_option("--data", cfg.data, "initial data (JSON)")->check(CLI::ExistingFile); };
  auto times_opt = [&](CLI::App* s) {
    s->add_option("--times", cfg.times, "comma separated times")->delimiter(',')->check(CLI::NonNegativeNumber);
  };

  std::map<CLI::App*, int (*)(const RunConfig&)> run;
  auto sub = [&](const char* name, const char* help, int (*f)(const RunConfig&)) {
    CLI::App* s = app.add_subcommand(name, help);
    graph_opts(s);
    run[s] = f;
    return s;
  };

  sub("validate", "check the tree invariants", cmd_validate);
  sub("spectrum", "negative eigenvalues and eigenfunctions", cmd_spectrum)
      ->add_option("--omega-max", cfg.omega_max, "upper end of the omega bracket")
      ->check(CLI::PositiveNumber);
  sub("resonance", "zero order of det D at omega = 0", cmd_resonance)
      ->add_option("--nodes", cfg.nodes, "contour nodes")
      ->check(CLI::PositiveNumber);
  {
    CLI::App* s = sub("strip-scan", "det D and ray ratios near the imaginary axis", cmd_strip_scan);
    s->add_option("--delta", cfg.delta, "lower |tau|")->check(CLI::PositiveNumber);
    s->add_option("--eps", cfg.eps, "half-width of the strip")->check(CLI::NonNegativeNumber);
    s->add_option("--tau-max", cfg.tau_max, "upper |tau|")->check(CLI::PositiveNumber);
    s->add_option("--nodes", cfg.nodes, "tau points per sign")->check(CLI::PositiveNumber);
  }
  sub("appendix-a", "ratio(0) = 1, ratio'(0) < 0 and zero orders at every stage", cmd_appendix_a);
  {
    CLI::App* s = sub("evolve", "dispersive plus bound evolution sampled on every edge (CSV)", cmd_evolve);
    data_opt(s);
    times_opt(s);
    s->add_option("--nodes", cfg.nodes, "sample points per edge")->check(CLI::Range(2, 1000000));
    s->add_option("--trunc", cfg.trunc, "sampled length of the rays")->check(CLI::PositiveNumber);
    s->add_option("--tau-max", cfg.tau_cut, "spectral cutoff")->check(CLI::PositiveNumber);
    s->add_option("--omega-max", cfg.omega_max, "upper end of the eigenvalue bracket")->check(CLI::PositiveNumber);
  }
  {
    CLI::App* s = sub("decay", "sup norm decay and fitted exponent", cmd_decay);
    data_opt(s);
    times_opt(s);
    s->add_option("--nodes", cfg.nodes, "minimum sample points per edge")->check(CLI::PositiveNumber);
  }
  {
    CLI::App* s = sub("oracle-compare", "propagator against Crank-Nicolson", cmd_oracle_compare);
    s->set_help_flag("--help", "print this help message and exit");
    data_opt(s);
    times_opt(s);
    s->add_option("--h", cfg.h, "grid spacing")->check(CLI::PositiveNumber);
    s->add_option("--dt", cfg.dt, "time step")->check(CLI::PositiveNumber);
    s->add_option("--trunc", cfg.trunc, "ray truncation length")->check(CLI::PositiveNumber);
    s->add_option("--tol", cfg.tol, "relative L2 tolerance")->check(CLI::PositiveNumber);
    s->add_option("--omega-max", cfg.omega_max, "upper end of the eigenvalue bracket")->check(CLI::PositiveNumber);
  }
  {
    CLI::App* s = sub("couplings-check", "rank and symmetry of (A, B) pairs", cmd_couplings_check);
    s->add_option("--couplings", cfg.couplings, "coupling spec (JSON)")->check(CLI::ExistingFile);
  }
  {
    CLI::App* s = sub("couplings-scan", "min |det D(i tau)| for general couplings (grid scan)", cmd_couplings_scan);
    s->add_option("--couplings", cfg.couplings, "coupling spec (JSON)")->check(CLI::ExistingFile);
    s->add_option("--tau-max", cfg.tau_max, "upper |tau|")->check(CLI::PositiveNumber);
    s->add_option("--nodes", cfg.nodes, "uniform tau points")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    return run.at(chosen)(cfg);
  } catch (const CLI::Error& e) {
    std::cerr << chosen->get_name() << ": " << e.what() << "\n";
    return 2;
  } catch (const Refusal& r) {
    std::cout << r.report.dump(2) << "\n";
    return 1;
  } catch (const ResonanceRefusal& e) {
    json j = to_json(e.report());
    j["error"] = e.what();
    std::cout << j.dump(2) << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cout << json{{"error", "schema"}, {"pointer", e.pointer()}, {"message", e.what()}}.dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}}.dump(2) << "\n";
    return 1;
  }
}
