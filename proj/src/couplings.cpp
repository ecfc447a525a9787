#include "qgraph/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/tools/roots.hpp>

namespace qgraph {

SelfAdjointReport check_self_adjoint(const MatrixR& A, const MatrixR& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw GraphError("coupling matrices must be square and of equal size");
  SelfAdjointReport r;
  MatrixR AB(A.rows(), 2 * A.cols());
  AB << A, B;
  Eigen::FullPivLU<MatrixR> lu(AB);
  lu.setThreshold(1e-10);
  r.rank = static_cast<int>(lu.rank());
  r.commutator = A.rows() ? (A * B.transpose() - B * A.transpose()).cwiseAbs().maxCoeff() : 0.0;
  r.ok = r.rank == A.rows() && r.commutator <= 1e-10;
  return r;
}

std::pair<MatrixR, MatrixR> delta_matrices(int d, double alpha) {
  if (d < 2) throw GraphError("delta matrices need degree d >= 2");
  MatrixR A = MatrixR::Zero(d, d), B = MatrixR::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) {
    A(i, i) = 1.0;
    A(i, i + 1) = -1.0;
  }
  A(d - 1, d - 1) = -alpha;
  B.row(d - 1).setOnes();
  return {A, B};
}

std::pair<MatrixR, MatrixR> vertex_matrices(const MetricTree& tree, const CouplingSpec& spec, std::size_t v) {
  const int d = static_cast<int>(tree.degree(v));
  const int id = tree.vertex(v).id;
  auto it = spec.find(id);
  if (it == spec.end()) return delta_matrices(d, tree.vertex(v).alpha);
  const Coupling& c = it->second;
  if (c.kind == Coupling::Kind::Delta) return delta_matrices(d, c.alpha);
  if (c.A.rows() != d || c.B.rows() != d || c.A.cols() != d || c.B.cols() != d)
    throw GraphError("coupling at vertex " + std::to_string(id) + " must be " + std::to_string(d) + "x" + std::to_string(d));
  if (!check_self_adjoint(c.A, c.B).ok) throw GraphError("coupling at vertex " + std::to_string(id) + " is not self-adjoint");
  return {c.A, c.B};
}

namespace {

ResolventSystem assemble(const MetricTree& tree, const CouplingSpec& spec, cplx w, const EdgeSources& src,
                         std::optional<std::size_t> flipped) {
  if (flipped && !tree.edge(*flipped).infinite()) throw GraphError("only rays can be flipped");
  ResolventSystem sys;
  sys.omega = w;
  sys.layout = make_layout(tree);
  const std::size_t n = sys.layout.size;
  sys.D = MatrixC::Zero(n, n);
  sys.T = VectorC::Zero(n);
  for (std::size_t v = 0; v < tree.vertex_count(); ++v) {
    const auto [A, B] = vertex_matrices(tree, spec, v);
    const auto& inc = tree.incident(v);
    const std::size_t r0 = sys.layout.first_row[v];
    for (std::size_t j = 0; j < inc.size(); ++j) {
      const std::size_t e = inc[j];
      const Edge& edge = tree.edge(e);
      // value / outgoing derivative against c and c~, and omega * free parts
      cplx vc, vct, dc, dct, vf, df;
      if (tree.vertex_index(edge.from) == v) {
        vc = 1.0;
        vct = 1.0;
        dc = w;
        dct = flipped == e ? w : -w;
        vf = src.t0[e];
        df = w * src.t0[e];
      } else {
        const cplx E = std::exp(w * edge.length), Ei = std::exp(-w * edge.length);
        vc = E;
        vct = Ei;
        dc = -w * E;
        dct = w * Ei;
        vf = src.ta[e];
        df = w * src.ta[e];
      }
      for (std::size_t i = 0; i < inc.size(); ++i) {
        const double a = A(i, j), b = B(i, j);
        if (sys.layout.c_col[e]) sys.D(r0 + i, *sys.layout.c_col[e]) += a * vc + b * dc;
        sys.D(r0 + i, sys.layout.ct_col[e]) += a * vct + b * dct;
        sys.T(r0 + i) -= a * vf + b * df;
      }
    }
  }
  return sys;
}

cplx det_of(const MatrixC& m) { return m.rows() ? m.partialPivLu().determinant() : cplx(1.0); }

// S = A - w B with the columns in `grow` replaced by A + w B.
cplx star_det(const MatrixR& A, const MatrixR& B, cplx w, std::initializer_list<std::size_t> grow) {
  MatrixC S = A.cast<cplx>() - w * B.cast<cplx>();
  for (std::size_t j : grow) S.col(j) = A.col(j).cast<cplx>() + w * B.col(j).cast<cplx>();
  return det_of(S);
}

} // namespace

MatrixC general_matrix(const MetricTree& tree, const CouplingSpec& spec, cplx omega, std::optional<std::size_t> flipped_ray) {
  return assemble(tree, spec, omega, zero_sources(tree), flipped_ray).D;
}

ResolventSystem assemble_general(const MetricTree& tree, const CouplingSpec& spec, cplx omega, const GraphFunction& u0) {
  if (omega == cplx(0.0)) throw GraphError("omega = 0 is excluded from the resolvent system");
  ResolventSystem sys = assemble(tree, spec, omega, sources_by_quadrature(tree, u0, omega), std::nullopt);
  sys.T /= omega;
  return sys;
}

cplx det_general(const MetricTree& tree, const CouplingSpec& spec, cplx omega) {
  return det_of(general_matrix(tree, spec, omega));
}

DetState det_recursive_general(const MetricTree& tree, const CouplingSpec& spec, cplx omega, bool all_ratios) {
  const auto& order = tree.construction_order();
  DetState st;
  st.omega = omega;
  std::map<int, cplx> known;
  cplx det = 1.0;
  for (std::size_t q = 0; q < order.size(); ++q) {
    const std::size_t v = order[q];
    const auto [A, B] = vertex_matrices(tree, spec, v);
    const auto& inc = tree.incident(v);
    const cplx s = star_det(A, B, omega, {});
    std::map<int, cplx> fresh;
    if (q == 0) {
      det = s;
      for (std::size_t j = 0; j < inc.size(); ++j) fresh[tree.edge(inc[j]).id] = star_det(A, B, omega, {j}) / s;
    } else {
      const std::size_t e = *tree.parent_edge(v);
      const int eid = tree.edge(e).id;
      cplx r;
      if (auto it = known.find(eid); it != known.end()) {
        r = it->second;
      } else {
        const MetricTree prev = construction_prefix(tree, q);
        CouplingSpec sub;
        for (const auto& [id, c] : spec)
          if (prev.has_vertex(id)) sub[id] = c;
        const std::size_t pe = prev.edge_index(eid);
        r = det_of(general_matrix(prev, sub, omega, pe)) / det_of(general_matrix(prev, sub, omega));
        ++st.column_flip_fallbacks;
      }
      const cplx x = std::exp(-2.0 * omega * tree.edge(e).length) * r;
      const cplx s0 = star_det(A, B, omega, {0});
      const cplx den = s - x * s0;
      det = std::exp(omega * tree.edge(e).length) * det * den;
      for (std::size_t j = 1; j < inc.size(); ++j)
        fresh[tree.edge(inc[j]).id] = (star_det(A, B, omega, {j}) - x * star_det(A, B, omega, {0, j})) / den;
    }
    known = std::move(fresh);
    st.stage_det.push_back(det);
    st.stage_ratio.push_back(known.empty() ? cplx(0.0) : known.begin()->second);
  }
  st.det = det;
  for (std::size_t e : tree.external_edges()) {
    const int id = tree.edge(e).id;
    if (auto it = known.find(id); it != known.end()) {
      st.ratios[id] = it->second;
      st.recursive_rays.push_back(id);
    } else if (all_ratios) {
      st.ratios[id] = det_of(general_matrix(tree, spec, omega, e)) / det;
    }
  }
  return st;
}

ConditionScan sufficient_condition_scan(const MetricTree& tree, const CouplingSpec& spec, double tau_max, int n_uniform,
                                        double threshold) {
  if (!(tau_max > 0.1) || n_uniform < 2) throw GraphError("bad tau grid");
  ConditionScan rep;
  for (std::size_t v = 0; v < tree.vertex_count(); ++v) {
    const auto [A, B] = vertex_matrices(tree, spec, v);
    Eigen::FullPivLU<MatrixR> lu(A);
    lu.setThreshold(1e-10);
    rep.removed_power += static_cast<int>(A.rows() - lu.rank());
  }
  std::vector<double> taus;
  for (int i = 0; i <= 200; ++i) taus.push_back(std::pow(10.0, -8.0 + 7.0 * i / 200.0));
  for (int i = 1; i <= n_uniform; ++i) taus.push_back(0.1 + (tau_max - 0.1) * i / n_uniform);
  const std::size_t n = taus.size();
  std::vector<double> vals(2 * n);
  const long total = static_cast<long>(2 * n);
#pragma omp parallel for schedule(static)
  for (long k = 0; k < total; ++k) {
    const double tau = (k % 2 == 0 ? 1.0 : -1.0) * taus[k / 2];
    vals[k] = std::abs(det_general(tree, spec, cplx(0.0, tau))) / std::pow(std::abs(tau), rep.removed_power);
  }
  const std::size_t best = std::min_element(vals.begin(), vals.end()) - vals.begin();
  rep.min_abs_det = vals[best];
  rep.tau_at_min = (best % 2 == 0 ? 1.0 : -1.0) * taus[best / 2];
  rep.points = vals.size();
  rep.plausible = rep.min_abs_det >= threshold;
  rep.verdict = rep.plausible ? "sufficient condition plausibly holds on the scanned grid (scan, not a proof)"
                              : "sufficient condition fails near tau = " + (std::ostringstream() << rep.tau_at_min).str() +
                                    " (grid scan)";
  return rep;
}

std::vector<double> general_eigenvalues(const MetricTree& tree, const CouplingSpec& spec, double omega_max,
                                        int scan_points) {
  const double lo = 1e-6;
  if (!(omega_max > lo) || scan_points < 2) throw GraphError("bad eigenvalue bracket");
  auto F = [&](double w) { return det_general(tree, spec, w).real(); };
  std::vector<double> grid(scan_points + 1), f(scan_points + 1);
  for (int i = 0; i <= scan_points; ++i) {
    grid[i] = lo + (omega_max - lo) * i / scan_points;
    f[i] = F(grid[i]);
  }
  std::vector<double> roots;
  for (int i = 0; i < scan_points; ++i) {
    if (f[i] == 0.0) {
      roots.push_back(grid[i]);
    } else if (f[i] * f[i + 1] < 0.0) {
      auto [a, b] = boost::math::tools::bisect(F, grid[i], grid[i + 1], [](double x, double y) { return y - x <= 1e-12; });
      roots.push_back(0.5 * (a + b));
    }
  }
  return roots;
}

} // namespace qgraph
