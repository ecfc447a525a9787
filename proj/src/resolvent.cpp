#include "qgraph/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

namespace qgraph {

SystemLayout make_layout(const MetricTree& tree) {
  SystemLayout lay;
  const std::size_t ne = tree.edge_count();
  lay.c_col.assign(ne, std::nullopt);
  lay.ct_col.assign(ne, 0);
  lay.first_row.assign(tree.vertex_count(), 0);
  std::size_t col = 0, row = 0;
  for (std::size_t v : tree.construction_order()) {
    auto pe = tree.parent_edge(v);
    if (pe) lay.c_col[*pe] = col++;
    for (std::size_t e : tree.incident(v))
      if (!pe || e != *pe) lay.ct_col[e] = col++;
    lay.first_row[v] = row;
    row += tree.degree(v);
  }
  if (col != row) throw GraphError("resolvent layout: unknown and equation counts differ");
  lay.size = col;
  return lay;
}

EdgeSources zero_sources(const MetricTree& tree) {
  return EdgeSources{std::vector<cplx>(tree.edge_count(), 0.0), std::vector<cplx>(tree.edge_count(), 0.0)};
}

namespace {

using Gauss = boost::math::quadrature::gauss<double, 30>;

// Composite fixed-order Gauss-Legendre; the result is a smooth function of the
// interval ends, which keeps finite-difference derivatives of t_e clean.
template <class F>
cplx composite_gauss(F&& f, double a, double b, double piece) {
  if (!(b > a)) return 0.0;
  int n = std::max(1, static_cast<int>(std::ceil((b - a) / piece)));
  double w = (b - a) / n;
  cplx s = 0.0;
  for (int i = 0; i < n; ++i) s += Gauss::integrate(f, a + i * w, a + (i + 1) * w);
  return s;
}

} // namespace

cplx t_integral(const MetricTree& tree, const GraphFunction& u0, std::size_t edge, cplx omega, double x) {
  auto sup = packet_support(tree, u0, edge);
  if (!sup) return 0.0;
  const int id = tree.edge(edge).id;
  double sig = kInf;
  for (const Packet& p : u0.on_edge(id)) sig = std::min(sig, p.sigma);
  auto f = [&](double y) { return u0(id, y) * std::exp(-omega * std::abs(x - y)); };
  const auto [lo, hi] = *sup;
  const double piece = 0.5 * sig;
  cplx s = composite_gauss(f, lo, std::clamp(x, lo, hi), piece) + composite_gauss(f, std::clamp(x, lo, hi), hi, piece);
  return 0.5 * s;
}

EdgeSources sources_by_quadrature(const MetricTree& tree, const GraphFunction& u0, cplx omega) {
  EdgeSources s = zero_sources(tree);
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    s.t0[e] = t_integral(tree, u0, e, omega, 0.0);
    if (!tree.edge(e).infinite()) s.ta[e] = t_integral(tree, u0, e, omega, tree.edge(e).length);
  }
  return s;
}

void require_contained(const MetricTree& tree, const GraphFunction& u0, double rel_tail) {
  const double r = std::sqrt(-2.0 * std::log(rel_tail));
  for (const auto& [id, ps] : u0.packets()) {
    if (!tree.has_edge(id)) throw GraphError("data refers to unknown edge " + std::to_string(id));
    const Edge& e = tree.edge(tree.edge_index(id));
    for (const Packet& p : ps) {
      if (p.amp == cplx(0.0)) continue;
      if (p.x0 - r * p.sigma < 0.0 || p.x0 + r * p.sigma > e.length)
        throw GraphError("packet at x0=" + std::to_string(p.x0) + " on edge " + std::to_string(id) +
                         " is not contained in its edge");
    }
  }
}

EdgeSources sources_closed_form(const MetricTree& tree, const GraphFunction& u0, cplx omega) {
  EdgeSources s = zero_sources(tree);
  const double root2pi = std::sqrt(2.0 * std::numbers::pi);
  const cplx I(0.0, 1.0);
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    const Edge& edge = tree.edge(e);
    for (const Packet& p : u0.on_edge(edge.id)) {
      const double s2 = p.sigma * p.sigma;
      // 1/2 int u(y) e^{-w y} dy and 1/2 int u(y) e^{w (y - a)} dy over the whole line.
      const cplx beta = omega - I * p.k;
      s.t0[e] += 0.5 * p.amp * p.sigma * root2pi * std::exp(-beta * p.x0 + 0.5 * beta * beta * s2);
      if (!edge.infinite()) {
        const cplx gamma = omega + I * p.k;
        s.ta[e] += 0.5 * p.amp * p.sigma * root2pi *
                   std::exp(gamma * p.x0 + 0.5 * gamma * gamma * s2 - omega * edge.length);
      }
    }
  }
  return s;
}

namespace {

struct Endpoint {
  std::optional<std::size_t> c;
  std::size_t ct = 0;
  cplx vc, vct, dc, dct; // value / outgoing derivative against c and c~
  cplx vfree, dfree;     // omega * (free part of value / derivative)
};

Endpoint endpoint(const MetricTree& tree, const SystemLayout& lay, const EdgeSources& src, std::size_t e,
                  std::size_t v, cplx w, bool flipped) {
  const Edge& edge = tree.edge(e);
  Endpoint ep;
  ep.c = lay.c_col[e];
  ep.ct = lay.ct_col[e];
  if (tree.vertex_index(edge.from) == v) {
    ep.vc = 1.0;
    ep.vct = 1.0;
    ep.dc = w;
    ep.dct = -w;
    ep.vfree = src.t0[e];
    ep.dfree = w * src.t0[e];
    if (flipped) ep.dct = w;
  } else {
    const cplx E = std::exp(w * edge.length), Ei = std::exp(-w * edge.length);
    ep.vc = E;
    ep.vct = Ei;
    ep.dc = -w * E;
    ep.dct = w * Ei;
    ep.vfree = src.ta[e];
    ep.dfree = w * src.ta[e];
  }
  return ep;
}

void add(MatrixC& D, std::size_t row, const Endpoint& ep, cplx sc, cplx sct) {
  if (ep.c) D(row, *ep.c) += sc;
  D(row, ep.ct) += sct;
}

} // namespace

ResolventSystem assemble_rows(const MetricTree& tree, cplx omega, const EdgeSources& src, FluxRow form,
                              bool scaled_free_terms, std::optional<std::size_t> flipped_ray) {
  if (flipped_ray && !tree.edge(*flipped_ray).infinite()) throw GraphError("only rays can be flipped");
  ResolventSystem sys;
  sys.omega = omega;
  sys.form = form;
  sys.layout = make_layout(tree);
  const std::size_t n = sys.layout.size;
  sys.D = MatrixC::Zero(n, n);
  sys.T = VectorC::Zero(n);

  for (std::size_t v : tree.construction_order()) {
    const auto& inc = tree.incident(v);
    const double alpha = tree.vertex(v).alpha;
    const std::size_t r0 = sys.layout.first_row[v];
    std::vector<Endpoint> eps;
    for (std::size_t e : inc) eps.push_back(endpoint(tree, sys.layout, src, e, v, omega, flipped_ray == e));

    for (std::size_t k = 0; k + 1 < eps.size(); ++k) {
      add(sys.D, r0 + k, eps[k], eps[k].vc, eps[k].vct);
      add(sys.D, r0 + k, eps[k + 1], -eps[k + 1].vc, -eps[k + 1].vct);
      sys.T(r0 + k) = eps[k + 1].vfree - eps[k].vfree;
    }

    // Cleared flux row: -(sum_e outgoing derivative - alpha * value on the reference edge).
    const std::size_t rf = r0 + eps.size() - 1;
    cplx rhs = -alpha * eps[0].vfree;
    for (const Endpoint& ep : eps) {
      add(sys.D, rf, ep, -ep.dc, -ep.dct);
      rhs += ep.dfree;
    }
    add(sys.D, rf, eps[0], alpha * eps[0].vc, alpha * eps[0].vct);
    sys.T(rf) = rhs;
    if (form == FluxRow::Normalized) {
      const cplx den = omega + alpha;
      if (den == cplx(0.0)) throw GraphError("normalization pole: omega = -alpha at vertex " + std::to_string(tree.vertex(v).id));
      sys.D.row(rf) /= den;
      sys.T(rf) /= den;
    }
  }
  if (!scaled_free_terms) {
    if (omega == cplx(0.0)) throw GraphError("omega = 0 is excluded from the resolvent system");
    sys.T /= omega;
  }
  return sys;
}

MatrixC system_matrix(const MetricTree& tree, cplx omega, FluxRow form, std::optional<std::size_t> flipped_ray) {
  return assemble_rows(tree, omega, zero_sources(tree), form, true, flipped_ray).D;
}

ResolventSystem assemble_system(const MetricTree& tree, cplx omega, const GraphFunction& u0) {
  if (omega == cplx(0.0)) throw GraphError("omega = 0 is excluded from the resolvent system");
  return assemble_rows(tree, omega, sources_by_quadrature(tree, u0, omega), FluxRow::Normalized, false);
}

ResolventSolution solve_resolvent(const ResolventSystem& sys, const MetricTree& tree, const GraphFunction& u0) {
  Eigen::PartialPivLU<MatrixC> lu(sys.D);
  const double rc = lu.rcond();
  if (!(rc > 1e-13))
    throw SingularSystemError("singular resolvent system (omega is an eigenvalue or resonance parameter), rcond=" +
                                  std::to_string(rc),
                              rc);
  VectorC x = lu.solve(sys.T);
  ResolventSolution sol{sys.omega, std::vector<cplx>(tree.edge_count(), 0.0),
                        std::vector<cplx>(tree.edge_count(), 0.0), tree, u0, 0.0};
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    if (sys.layout.c_col[e]) sol.c[e] = x(*sys.layout.c_col[e]);
    sol.ct[e] = x(sys.layout.ct_col[e]);
  }
  const double scale = sys.D.norm() * x.norm() + sys.T.norm();
  sol.residual = scale > 0.0 ? (sys.D * x - sys.T).norm() / scale : 0.0;
  return sol;
}

ResolventSolution resolvent(const MetricTree& tree, const GraphFunction& u0, cplx omega) {
  return solve_resolvent(assemble_system(tree, omega, u0), tree, u0);
}

cplx evaluate_resolvent(const ResolventSolution& sol, std::size_t edge, double x) {
  const cplx w = sol.omega;
  return sol.c[edge] * std::exp(w * x) + sol.ct[edge] * std::exp(-w * x) + t_integral(sol.tree, sol.u0, edge, w, x) / w;
}

cplx residual_check(const ResolventSolution& sol, std::size_t edge, double x) {
  const double h = 1e-3;
  auto R = [&](double y) { return evaluate_resolvent(sol, edge, y); };
  const cplx f0 = R(x);
  const cplx d2 = (-R(x - 2 * h) + 16.0 * R(x - h) - 30.0 * f0 + 16.0 * R(x + h) - R(x + 2 * h)) / (12.0 * h * h);
  const int id = sol.tree.edge(edge).id;
  return -d2 + sol.omega * sol.omega * f0 - sol.u0(id, x);
}

cplx outgoing_derivative(const ResolventSolution& sol, std::size_t edge, std::size_t v) {
  const Edge& e = sol.tree.edge(edge);
  const bool initial = sol.tree.vertex_index(e.from) == v;
  const double x0 = initial ? 0.0 : e.length;
  const double dir = initial ? 1.0 : -1.0;
  const double h = 1e-5 * std::min(1.0, e.length);
  cplx f[5];
  for (int i = 0; i < 5; ++i) f[i] = evaluate_resolvent(sol, edge, x0 + dir * i * h);
  return (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
}

CouplingDefects coupling_defects(const ResolventSolution& sol) {
  CouplingDefects d;
  const MetricTree& tree = sol.tree;
  for (std::size_t v = 0; v < tree.vertex_count(); ++v) {
    const auto& inc = tree.incident(v);
    std::vector<cplx> vals;
    for (std::size_t e : inc) {
      const Edge& edge = tree.edge(e);
      double x = tree.vertex_index(edge.from) == v ? 0.0 : edge.length;
      vals.push_back(evaluate_resolvent(sol, e, x));
    }
    for (std::size_t k = 1; k < vals.size(); ++k)
      d.continuity = std::max(d.continuity, std::abs(vals[k] - vals[0]) / (1.0 + std::abs(vals[0])));
    cplx flux = -tree.vertex(v).alpha * vals[0];
    for (std::size_t e : inc) flux += outgoing_derivative(sol, e, v);
    d.flux = std::max(d.flux, std::abs(flux));
  }
  return d;
}

double cramer_defect(const ResolventSystem& sys) {
  Eigen::PartialPivLU<MatrixC> lu(sys.D);
  const VectorC x = lu.solve(sys.T);
  const cplx det = lu.determinant();
  const double xmax = x.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < sys.D.cols(); ++j) {
    MatrixC M = sys.D;
    M.col(j) = sys.T;
    const cplx dj = M.partialPivLu().determinant();
    const double scale = std::max(std::abs(dj), xmax * std::abs(det));
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(x(j) * det - dj) / scale);
  }
  return worst;
}

void write_system_csv(std::ostream& os, const ResolventSystem& sys) {
  os.precision(17);
  for (Eigen::Index i = 0; i < sys.D.rows(); ++i) {
    for (Eigen::Index j = 0; j < sys.D.cols(); ++j) os << sys.D(i, j).real() << ',' << sys.D(i, j).imag() << ',';
    os << sys.T(i).real() << ',' << sys.T(i).imag() << '\n';
  }
}

} // namespace qgraph
