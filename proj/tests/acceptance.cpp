// Acceptance run: one line per criterion, exit status 1 if any fails.
//
//   acceptance            all criteria
//   acceptance 3 7        only criteria 3 and 7

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "qgraph/couplings.hpp"
#include "qgraph/fdm.hpp"
#include "qgraph/generators.hpp"
#include "qgraph/propagator.hpp"

using namespace qgraph;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Positive strengths, p vertices, degrees 2..4.
MetricTree positive_tree(std::uint64_t seed, int p) {
  RandomTreeOptions o;
  o.alpha_min = 0.3;
  o.alpha_max = 3.0;
  o.length_min = 0.3;
  o.length_max = 3.0;
  o.degree_min = 2;
  o.degree_max = 4;
  return random_tree(seed, p, o);
}

// The four trees used by the oracle, decay and mass criteria.
std::vector<std::pair<std::string, MetricTree>> oracle_trees() {
  return {{"single delta", MetricTree::star(2, 1.0)},
          {"two-delta line", caterpillar({1.0, 1.0}, {1.0})},
          {"star n=3", MetricTree::star(3, 1.0)},
          {"2-vertex bushy", caterpillar({1.0, 1.0}, {1.0}, {1, 1})}};
}

const Packet kIncoming{1.0, 7.0, 1.0, -1.5};

Outcome c1_closed_form() {
  std::vector<cplx> ws;
  for (int k = 0; k < 50; ++k) {
    const double s = 0.1 + 9.9 * k / 49.0;
    ws.emplace_back(s, 0.0);
    ws.emplace_back(0.0, s);
  }
  double worst_det = 0.0, worst_ratio = 0.0;
  for (int n : {2, 3, 4})
    for (double a : {-3.0, -1.0, 0.5, 1.0, 2.0}) {
      const MetricTree t = MetricTree::star(n, a);
      for (cplx w : ws) {
        worst_det = std::max(worst_det, rel(det_direct(t, w), (double(n) * w + a) / (w + a)));
        worst_ratio = std::max(worst_ratio, rel(ratio_direct(t, w, 0), (double(n - 2) * w + a) / (double(n) * w + a)));
      }
    }
  return {worst_det <= 1e-12 && worst_ratio <= 1e-12,
          fmt("max rel err det %.2e, ratio %.2e over 15 stars x 100 points", worst_det, worst_ratio)};
}

Outcome c2_recursion() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> re(0.05, 5.0), im(-10.0, 10.0);
  double worst = 0.0;
  int fallbacks = 0;
  for (int i = 0; i < 20; ++i) {
    RandomTreeOptions o;
    o.alpha_min = -3.0;
    o.alpha_max = 3.0;
    o.length_min = 0.3;
    o.length_max = 3.0;
    o.degree_min = i % 2 == 0 ? 2 : 3;  // caterpillar-like / bushy
    o.degree_max = i % 2 == 0 ? 3 : 4;
    const MetricTree t = random_tree(1000 + i, 1 + i % 5, o);
    for (int k = 0; k < 100; ++k) {
      const cplx w(re(rng), im(rng));
      const DetState st = det_recursive(t, w, false);
      fallbacks += st.column_flip_fallbacks;
      worst = std::max(worst, rel(st.det, det_direct(t, w)));
    }
  }
  return {worst <= 1e-10, fmt("max rel err %.2e on 20 trees x 100 omega (%d column-flip fallbacks)", worst, fallbacks)};
}

MetricTree resonant_line() { return attach_vertex(MetricTree::star(2, 2.0), 1, 0.5, -1.0, 2); }

Outcome c3_zero_order() {
  int good = 0;
  std::string bad;
  for (int i = 0; i < 20; ++i) {
    const int p = 1 + i % 5;
    const MetricTree t = positive_tree(2000 + i, p);
    const int z = zero_order_at_origin(t).zero_order;
    if (z == p - 1)
      ++good;
    else
      bad += fmt(" seed %d: %d vs %d;", 2000 + i, z, p - 1);
  }
  const int zr = dispersive_condition(resonant_line()).zero_order;
  return {good == 20 && zr >= 2, fmt("%d/20 trees have order p-1;%s resonant line order %d (p = 2)", good, bad.c_str(), zr)};
}

Outcome c4_appendix_a() {
  int stages = 0, ok = 0;
  double worst_one = 0.0, worst_deriv = -kInf;
  for (int i = 0; i < 20; ++i) {
    const PropertyReport r = appendix_a_checks(positive_tree(3000 + i, 1 + i % 5));
    for (const StageProperties& s : r.stages) {
      ++stages;
      const double d1 = std::abs(s.ratio_at_zero - 1.0);
      worst_one = std::max(worst_one, d1);
      worst_deriv = std::max(worst_deriv, s.ratio_derivative_at_zero.real());
      if (d1 <= 1e-8 && s.ratio_derivative_at_zero.real() < 0.0) ++ok;
    }
  }
  return {ok == stages, fmt("%d/%d stages: max |ratio(0)-1| %.2e, max Re ratio'(0) %.3g", ok, stages, worst_one, worst_deriv)};
}

Outcome c5_spectrum() {
  const MetricTree line = MetricTree::star(2, -2.0);
  const SpectralData sd = find_eigenvalues(line);
  if (sd.omegas.size() != 1) return {false, fmt("%zu eigenvalues for the alpha = -2 well", sd.omegas.size())};
  const double lambda = -sd.omegas[0] * sd.omegas[0];
  const Eigenfunction& f = sd.eigenfunctions[0];
  const cplx phase = f(0, 0.0) / std::abs(f(0, 0.0));
  double linf = 0.0;
  for (std::size_t e = 0; e < 2; ++e)
    for (int j = 0; j <= 2000; ++j) {
      const double x = 10.0 * j / 2000.0;
      linf = std::max(linf, std::abs(f(e, x) / phase - std::exp(-x)));
    }
  int nonempty = 0;
  for (int i = 0; i < 20; ++i) nonempty += find_eigenvalues(positive_tree(2000 + i, 1 + i % 5)).omegas.empty() ? 0 : 1;
  return {std::abs(lambda + 1.0) <= 1e-9 && linf <= 1e-7 && nonempty == 0,
          fmt("eigenvalue %.12f, L-inf vs e^{-|x|} %.2e, %d/20 positive trees with eigenvalues", lambda, linf, nonempty)};
}

Outcome c6_resolvent() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> re(0.2, 2.0), im(-3.0, 3.0), kk(-2.0, 2.0);
  double ode = 0.0, cont = 0.0, flux = 0.0, cramer = 0.0;
  for (int i = 0; i < 10; ++i) {
    RandomTreeOptions o;
    o.alpha_min = -3.0;
    o.alpha_max = 3.0;
    o.length_min = 0.3;
    o.length_max = 3.0;
    const MetricTree t = random_tree(4000 + i, 1 + i % 5, o);
    std::map<int, std::vector<Packet>> data;
    for (std::size_t e = 0; e < t.edge_count(); ++e) {
      const Edge& ed = t.edge(e);
      if (ed.infinite())
        data[ed.id].push_back(Packet{1.0, 3.0, 0.8, kk(rng)});
      else
        data[ed.id].push_back(Packet{cplx(0.0, 1.0), 0.5 * ed.length, 0.2 * ed.length, kk(rng)});
    }
    const GraphFunction u0(data);
    for (int k = 0; k < 10; ++k) {
      const cplx w(re(rng), im(rng));
      const ResolventSolution sol = resolvent(t, u0, w);
      for (std::size_t e = 0; e < t.edge_count(); ++e) {
        const Edge& ed = t.edge(e);
        for (double x : ed.infinite() ? std::vector<double>{1.0, 4.0} : std::vector<double>{0.25 * ed.length, 0.5 * ed.length, 0.75 * ed.length})
          ode = std::max(ode, std::abs(residual_check(sol, e, x)));
      }
      const CouplingDefects d = coupling_defects(sol);
      cont = std::max(cont, d.continuity);
      flux = std::max(flux, d.flux);
      cramer = std::max(cramer, cramer_defect(assemble_system(t, w, u0)));
    }
  }
  return {ode <= 1e-5 && cont <= 1e-9 && flux <= 1e-7 && cramer <= 1e-9,
          fmt("ODE residual %.2e, continuity %.2e, flux %.2e, Cramer %.2e", ode, cont, flux, cramer)};
}

Outcome c7_free_line() {
  const MetricTree line = MetricTree::star(2, 0.0);
  const Packet p{1.0, 8.0, 1.0, 1.0};
  EvolutionRequest req;
  req.tree = line;
  req.u0 = StateFunction{GraphFunction({{0, {p}}}), {}};
  req.times = {0.5, 1.0, 5.0, 20.0};
  for (std::size_t e = 0; e < 2; ++e)
    for (int j = 0; j <= 1500; ++j) req.samples.push_back(SamplePoint{e, 300.0 * j / 1500.0});
  const EvolutionResult r = evolve_dispersive(req);
  std::string per;
  double worst = 0.0;
  for (std::size_t it = 0; it < r.times.size(); ++it) {
    double err = 0.0, peak = 0.0;
    for (std::size_t is = 0; is < r.samples.size(); ++is) {
      const SamplePoint& s = r.samples[is];
      const cplx exact = free_packet(p, r.times[it], s.edge == 0 ? s.x : -s.x);
      err = std::max(err, std::abs(r.values[it][is] - exact));
      peak = std::max(peak, std::abs(exact));
    }
    worst = std::max(worst, err / peak);
    per += fmt(" t=%g: %.1e", r.times[it], err / peak);
  }
  return {worst <= 1e-4, "relative L-inf" + per};
}

Outcome c8_oracle() {
  const GraphFunction u0({{0, {kIncoming}}});
  double worst = 0.0;
  std::string per;
  for (const auto& [name, t] : oracle_trees()) {
    const OracleComparison r = oracle_compare(t, u0, {0.5, 1.0, 2.0});
    worst = std::max(worst, r.max_rel_l2);
    per += fmt(" %s %.1e;", name.c_str(), r.max_rel_l2);
  }
  return {worst <= 1e-2, "h=1/64, dt=1/128, max relative L2:" + per};
}

Outcome c9_decay() {
  // narrow packet next to the vertex (x0 = 7 sigma keeps it on one edge); the
  // fitted slope on [1, 100] only approaches 1/2 once t >> x0^2
  const double sigma = 0.15;
  const GraphFunction u0({{0, {Packet{1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi)), 7.0 * sigma, sigma, 0.0}}}});
  const std::vector<double> times{1, 2, 4, 8, 16, 32, 64, 100};
  bool ok = true;
  std::string per;
  for (const auto& [name, t] : oracle_trees()) {
    const DecayReport a = decay_scan(t, u0, times);
    TauQuadrature fine;
    fine.panel_scale = 2.0;
    fine.tau_max = 1.5 * (8.0 / sigma);
    const DecayReport b = decay_scan(t, u0, times, 400, fine);
    const double ma = *std::max_element(a.sqrt_t_sup.begin(), a.sqrt_t_sup.end()) / a.l1_norm;
    const double mb = *std::max_element(b.sqrt_t_sup.begin(), b.sqrt_t_sup.end()) / b.l1_norm;
    const double drift = std::abs(ma - mb) / mb;
    ok = ok && std::abs(a.beta - 0.5) <= 0.05 && drift <= 0.05;
    per += fmt(" %s beta %.3f C %.3f refine %.1e;", name.c_str(), a.beta, ma, drift);
  }
  return {ok, "t in [1,100]:" + per};
}

Outcome c10_refusal() {
  EvolutionRequest req;
  req.tree = resonant_line();
  req.u0 = StateFunction{GraphFunction({{0, {kIncoming}}}), {}};
  req.times = {1.0};
  req.samples = {SamplePoint{0, 1.0}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    evolve_dispersive(req);
  } catch (const ResonanceRefusal& e) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const ResonanceReport& r = e.report();
    return {!r.condition_holds && r.zero_order >= 2 && s < 5.0,
            fmt("refused: zero_order %d, p %d, condition_holds %s, %.3f s", r.zero_order, r.p,
                r.condition_holds ? "true" : "false", s)};
  }
  return {false, "resonant configuration was evolved"};
}

Outcome c11_couplings() {
  double ratio_drift = 0.0, eig = 0.0;
  bool counts = true;
  for (const MetricTree& t : {MetricTree::star(3, -3.0), caterpillar({-2.0, -1.5}, {1.0}), caterpillar({-2.5, 0.5, -1.0}, {0.8, 1.4}),
                              random_tree(5000, 4)}) {
    const cplx k0 = det_general(t, {}, 0.7) / cleared_det(t, 0.7);
    for (cplx w : {cplx(0.3), cplx(2.0), cplx(0.5, 3.0), cplx(-0.2, 7.0), cplx(1.0, -1.0)})
      ratio_drift = std::max(ratio_drift, rel(det_general(t, {}, w) / cleared_det(t, w), k0));
    const SpectralData sd = find_eigenvalues(t);
    const std::vector<double> g = general_eigenvalues(t, {}, default_omega_max(t));
    counts = counts && g.size() == sd.omegas.size();
    for (std::size_t i = 0; counts && i < g.size(); ++i) eig = std::max(eig, std::abs(g[i] - sd.omegas[i]));
  }
  const auto [A, B] = delta_matrices(3, 1.3);
  const bool accept_delta = check_self_adjoint(A, B).ok;
  const bool accept_dirichlet = check_self_adjoint(MatrixR::Identity(3, 3), MatrixR::Zero(3, 3)).ok;
  MatrixR R = MatrixR::Zero(2, 2);
  R(0, 0) = 1.0;
  const bool reject_deficient = !check_self_adjoint(R, MatrixR::Zero(2, 2)).ok;
  const ConditionScan delta_scan = sufficient_condition_scan(caterpillar({1.0, 2.0}, {1.0}), {});
  const CouplingSpec dir{{0, Coupling::general(MatrixR::Identity(3, 3), MatrixR::Zero(3, 3))}};
  const ConditionScan dir_scan = sufficient_condition_scan(MetricTree::star(3, 0.0), dir);
  const bool pass = ratio_drift <= 1e-10 && counts && eig <= 1e-9 && accept_delta && accept_dirichlet && reject_deficient &&
                    !delta_scan.plausible && std::abs(delta_scan.tau_at_min) < 1e-6 && dir_scan.plausible &&
                    dir_scan.min_abs_det > 0.0;
  return {pass, fmt("ratio drift %.1e, eigenvalue diff %.1e%s, self-adjoint %d%d%d, delta p=2 min %.1e at tau %.0e, "
                    "Dirichlet min %.3f",
                    ratio_drift, eig, counts ? "" : " (count mismatch)", accept_delta, accept_dirichlet, reject_deficient,
                    delta_scan.min_abs_det, delta_scan.tau_at_min, dir_scan.min_abs_det)};
}

// Composite 10-point Gauss-Legendre on unit panels of [0, len].
void gauss_points(std::size_t edge, double len, std::vector<SamplePoint>& pts, std::vector<double>& w) {
  using G = boost::math::quadrature::gauss<double, 10>;
  const int panels = std::max(1, static_cast<int>(std::ceil(len)));
  const double hw = 0.5 * len / panels;
  for (int k = 0; k < panels; ++k) {
    const double mid = (2 * k + 1) * hw;
    for (std::size_t i = 0; i < G::abscissa().size(); ++i)
      for (double sgn : {-1.0, 1.0}) {
        pts.push_back(SamplePoint{edge, mid + sgn * hw * G::abscissa()[i]});
        w.push_back(hw * G::weights()[i]);
      }
  }
}

Outcome c12_mass() {
  const GraphFunction u0({{0, {kIncoming}}});
  const std::vector<double> times{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  const double norm0 = std::abs(kIncoming.amp) * std::sqrt(kIncoming.sigma * std::sqrt(std::numbers::pi));
  double prop = 0.0, cn = 0.0;
  for (const auto& [name, t] : oracle_trees()) {
    for (double time : times) {
      EvolutionRequest req;
      req.tree = t;
      req.u0 = StateFunction{u0, {}};
      req.times = {time};
      // rays out to 8 spreads past the centre of the outgoing packet
      const double spread = std::hypot(kIncoming.sigma, 2.0 * time / kIncoming.sigma);
      const double ray = kIncoming.x0 + 2.0 * std::abs(kIncoming.k) * time + 8.0 * spread;
      std::vector<double> w;
      for (std::size_t e = 0; e < t.edge_count(); ++e)
        gauss_points(e, t.edge(e).infinite() ? ray : t.edge(e).length, req.samples, w);
      const EvolutionResult r = evolve_dispersive(req);
      double m = 0.0;
      for (std::size_t is = 0; is < w.size(); ++is) m += w[is] * std::norm(r.values[0][is]);
      prop = std::max(prop, std::abs(std::sqrt(m) - norm0) / norm0);
    }
    const DiscreteTree grid = discretize(t, 1.0 / 64.0, truncation_length(t, u0, times.back()));
    const std::vector<cplx> c0 = nodal(grid, StateFunction{u0, {}});
    const double m0 = discrete_mass(grid, c0);
    for (const auto& s : evolve_cn(grid, c0, times, 1.0 / 128.0)) cn = std::max(cn, std::abs(discrete_mass(grid, s) - m0) / m0);
  }
  return {prop <= 1e-3 && cn <= 1e-10,
          fmt("propagator L2 norm drift %.1e over t in [0.1,10], CN discrete mass drift %.1e", prop, cn)};
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-form determinants", c1_closed_form},
      {"recursion equals direct determinant", c2_recursion},
      {"zero order at the origin", c3_zero_order},
      {"stage ratio properties", c4_appendix_a},
      {"spectrum", c5_spectrum},
      {"resolvent correctness", c6_resolvent},
      {"free-line propagator", c7_free_line},
      {"propagator vs Crank-Nicolson", c8_oracle},
      {"dispersive decay", c9_decay},
      {"resonance refusal", c10_refusal},
      {"general couplings", c11_couplings},
      {"mass conservation", c12_mass},
  };
  // Positional numbers select criteria. "--expect-fail N" marks a criterion whose
  // failure is known; it still prints FAIL, but an unexpected pass fails the run.
  std::set<int> only, expected;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--expect-fail" && i + 1 < argc)
      expected.insert(std::atoi(argv[++i]));
    else
      only.insert(std::atoi(argv[i]));
  }

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool known = expected.count(id) > 0;
    const char* tag = o.pass ? (known ? " (unexpected pass)" : "") : (known ? " (expected failure)" : "");
    std::printf("criterion %2d %s  %s: %s [%.1f s]%s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str(), s,
                tag);
    std::fflush(stdout);
    failed += o.pass == known ? 1 : 0;
  }
  return failed == 0 ? 0 : 1;
}
