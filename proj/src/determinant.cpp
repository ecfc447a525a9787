#include "qgraph/determinant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "qgraph/contour.hpp"
#include "qgraph/resolvent.hpp"

namespace qgraph {

namespace {

cplx det_of(const MatrixC& m) {
  if (m.rows() == 0) return 1.0;
  return m.partialPivLu().determinant();
}

// First outgoing edge of the vertex (a ray in its own construction prefix).
std::size_t newest_ray(const MetricTree& tree, std::size_t v) {
  auto pe = tree.parent_edge(v);
  for (std::size_t e : tree.incident(v))
    if (!pe || e != *pe) return e;
  throw GraphError("vertex " + std::to_string(tree.vertex(v).id) + " has no outgoing edge");
}

} // namespace

cplx det_direct(const MetricTree& tree, cplx omega) {
  return det_of(system_matrix(tree, omega, FluxRow::Normalized));
}

cplx cleared_det(const MetricTree& tree, cplx omega) {
  return det_of(system_matrix(tree, omega, FluxRow::Cleared));
}

cplx ratio_direct(const MetricTree& tree, cplx omega, std::size_t ray) {
  const cplx den = det_direct(tree, omega);
  if (den == cplx(0.0)) throw SingularSystemError("ratio undefined: det D vanishes", 0.0);
  return det_of(system_matrix(tree, omega, FluxRow::Normalized, ray)) / den;
}

MetricTree construction_prefix(const MetricTree& tree, std::size_t q) {
  const auto& order = tree.construction_order();
  if (q == 0 || q > order.size()) throw GraphError("construction prefix out of range");
  std::set<int> keep;
  for (std::size_t i = 0; i < q; ++i) keep.insert(tree.vertex(order[i]).id);
  std::vector<Vertex> vs;
  for (const Vertex& v : tree.vertices())
    if (keep.count(v.id)) vs.push_back(v);
  std::vector<Edge> es;
  for (Edge e : tree.edges()) {
    if (!keep.count(e.from)) continue;
    if (e.to && !keep.count(*e.to)) {
      e.to.reset();
      e.length = kInf;
    }
    es.push_back(e);
  }
  return MetricTree(std::move(vs), std::move(es), tree.root_id());
}

DetState det_recursive(const MetricTree& tree, cplx omega, bool all_ratios) {
  const auto& order = tree.construction_order();
  DetState st;
  st.omega = omega;

  std::map<int, cplx> known; // ratios of the newest rays
  cplx det = 1.0;
  for (std::size_t q = 0; q < order.size(); ++q) {
    const std::size_t v = order[q];
    const double alpha = tree.vertex(v).alpha;
    const double n = static_cast<double>(tree.degree(v));
    const cplx w0 = n * omega + alpha, w1 = (n - 2.0) * omega + alpha, w2 = (n - 4.0) * omega + alpha;
    const cplx pole = omega + alpha;
    if (pole == cplx(0.0)) throw GraphError("normalization pole: omega = -alpha at vertex " + std::to_string(tree.vertex(v).id));

    cplx ratio;
    if (q == 0) {
      det = w0 / pole;
      ratio = w1 / w0;
    } else {
      const std::size_t e = *tree.parent_edge(v);
      const int eid = tree.edge(e).id;
      const double a = tree.edge(e).length;
      cplx r;
      if (auto it = known.find(eid); it != known.end()) {
        r = it->second;
      } else {
        const MetricTree prev = construction_prefix(tree, q);
        r = ratio_direct(prev, omega, prev.edge_index(eid));
        ++st.column_flip_fallbacks;
      }
      const cplx x = std::exp(-2.0 * omega * a) * r;
      det = (w0 / pole) * std::exp(omega * a) * det * (1.0 - (w1 / w0) * x);
      ratio = (w1 - w2 * x) / (w0 - w1 * x);
    }
    known.clear();
    auto pe = tree.parent_edge(v);
    for (std::size_t e : tree.incident(v))
      if (!pe || e != *pe) known[tree.edge(e).id] = ratio;
    st.stage_det.push_back(det);
    st.stage_ratio.push_back(ratio);
  }
  st.det = det;

  for (std::size_t e : tree.external_edges()) {
    const int id = tree.edge(e).id;
    if (auto it = known.find(id); it != known.end()) {
      st.ratios[id] = it->second;
      st.recursive_rays.push_back(id);
    } else if (all_ratios) {
      st.ratios[id] = ratio_direct(tree, omega, e);
    }
  }
  return st;
}

RatioParts stage_ratio_parts(const MetricTree& tree, std::size_t q, cplx omega) {
  const MetricTree pre = construction_prefix(tree, q);
  const std::size_t v = pre.vertex_index(tree.vertex(tree.construction_order()[q - 1]).id);
  const std::size_t ray = newest_ray(pre, v);
  return RatioParts{det_of(system_matrix(pre, omega, FluxRow::Cleared, ray)),
                    det_of(system_matrix(pre, omega, FluxRow::Cleared))};
}

double origin_radius(const MetricTree& tree) {
  double r = 0.1;
  // nv + alpha on a star of degree n vanishes at -alpha / n
  const double rays = static_cast<double>(std::max<std::size_t>(1, tree.external_edges().size()));
  for (const Vertex& v : tree.vertices()) r = std::min(r, 0.5 * std::abs(v.alpha) / rays);
  const double amax = tree.max_internal_length();
  if (amax > 0.0) r = std::min(r, 0.5 / amax);
  return r;
}

namespace {

int rounded_winding(const std::vector<cplx>& vals, double& raw) {
  auto w = contour::winding(vals);
  if (!w) throw InconclusiveError("inconclusive winding count (phase jump or zero on the contour), refine r");
  raw = *w;
  const double m = std::round(*w);
  if (std::abs(*w - m) > 0.01) throw InconclusiveError("inconclusive, non-integer winding " + std::to_string(*w) + ", refine r");
  return static_cast<int>(m);
}

} // namespace

ResonanceReport zero_order_at_origin(const MetricTree& tree, std::optional<double> radius, int nodes) {
  for (const Vertex& v : tree.vertices())
    if (v.alpha == 0.0)
      throw GraphError("zero order at the origin needs nonzero strengths (vertex " + std::to_string(v.id) + ")");
  ResonanceReport rep;
  rep.p = static_cast<int>(tree.vertex_count());
  rep.radius = radius.value_or(origin_radius(tree));
  if (!(rep.radius > 0.0)) throw GraphError("contour radius must be positive");
  const auto vals = contour::on_circle([&](cplx z) { return cleared_det(tree, z); }, rep.radius, nodes);
  rep.zero_order = rounded_winding(vals, rep.winding_raw);
  rep.condition_holds = rep.zero_order == rep.p - 1;
  rep.derivative_value = std::tgamma(static_cast<double>(rep.p)) * contour::taylor_coefficient(vals, rep.radius, rep.p - 1);
  return rep;
}

ResonanceReport dispersive_condition(const MetricTree& tree, int nodes) {
  ResonanceReport rep;
  rep.p = static_cast<int>(tree.vertex_count());
  double r = 0.1;
  int zero = 0;
  const double rays = static_cast<double>(std::max<std::size_t>(1, tree.external_edges().size()));
  for (const Vertex& v : tree.vertices()) {
    if (v.alpha == 0.0)
      ++zero;
    else
      r = std::min(r, 0.5 * std::abs(v.alpha) / rays);
  }
  const double amax = tree.max_internal_length();
  if (amax > 0.0) r = std::min(r, 0.5 / amax);
  rep.radius = r;
  const auto vals = contour::on_circle([&](cplx z) { return cleared_det(tree, z); }, r, nodes);
  rep.zero_order = rounded_winding(vals, rep.winding_raw) - zero;
  rep.condition_holds = rep.zero_order == rep.p - 1;
  rep.derivative_value = std::tgamma(static_cast<double>(rep.p + zero)) *
                         contour::taylor_coefficient(vals, r, rep.p - 1 + zero);
  return rep;
}

int numerator_zero_order(const MetricTree& tree, std::size_t lambda, std::size_t edge, bool tilde,
                         std::optional<double> radius, int nodes) {
  const SystemLayout lay = make_layout(tree);
  std::size_t col;
  if (tilde) {
    col = lay.ct_col.at(edge);
  } else {
    if (!lay.c_col.at(edge)) throw GraphError("rays carry no growing coefficient");
    col = *lay.c_col[edge];
  }
  EdgeSources src = zero_sources(tree);
  src.t0.at(lambda) = 1.0;
  if (!tree.edge(lambda).infinite()) src.ta[lambda] = 1.0;
  const double r = radius.value_or(origin_radius(tree));
  const auto vals = contour::on_circle(
      [&](cplx z) {
        ResolventSystem sys = assemble_rows(tree, z, src, FluxRow::Cleared, true);
        sys.D.col(col) = sys.T;
        return det_of(sys.D);
      },
      r, nodes);
  double peak = 0.0;
  for (const cplx& v : vals) peak = std::max(peak, std::abs(v));
  if (peak < 1e-300) return -1;
  double raw = 0.0;
  return rounded_winding(vals, raw);
}

namespace {

struct PointResult {
  double abs_det;
  cplx omega;
  std::vector<double> abs_ratio;
};

PointResult scan_point(const MetricTree& tree, const std::vector<std::size_t>& rays, cplx omega) {
  const MatrixC D = system_matrix(tree, omega, FluxRow::Normalized);
  Eigen::PartialPivLU<MatrixC> lu(D);
  PointResult pr{std::abs(lu.determinant()), omega, {}};
  const SystemLayout lay = make_layout(tree);
  for (std::size_t e : rays) {
    // The flipped matrix differs from D in one column: det ratio = 1 + e_j^T D^{-1} (col~ - col).
    const std::size_t j = lay.ct_col[e];
    const VectorC diff = system_matrix(tree, omega, FluxRow::Normalized, e).col(j) - D.col(j);
    const VectorC y = lu.solve(diff);
    pr.abs_ratio.push_back(std::abs(1.0 + y(j)));
  }
  return pr;
}

std::vector<cplx> strip_points(const StripGrid& g) {
  if (!(g.delta > 0.0) || !(g.tau_max > g.delta) || g.n_tau < 1 || g.n_re < 1 || g.eps < 0.0)
    throw GraphError("bad strip grid");
  std::vector<double> re;
  for (int i = 0; i < g.n_re; ++i) re.push_back(g.n_re == 1 ? 0.0 : -g.eps + 2.0 * g.eps * i / (g.n_re - 1));
  if (std::find(re.begin(), re.end(), 0.0) == re.end()) re.push_back(0.0);
  std::vector<cplx> pts;
  for (double s : re) {
    for (int j = 0; j < g.n_tau; ++j) {
      const double tau = g.n_tau == 1 ? g.delta : g.delta + (g.tau_max - g.delta) * j / (g.n_tau - 1);
      pts.emplace_back(s, tau);
      pts.emplace_back(s, -tau);
    }
  }
  return pts;
}

ScanReport merge(const MetricTree& tree, const std::vector<std::size_t>& rays, const std::vector<PointResult>& res) {
  ScanReport rep;
  rep.points = res.size();
  rep.min_abs_det = kInf;
  for (std::size_t e : rays) rep.max_abs_ratio[tree.edge(e).id] = rep.max_axis_ratio[tree.edge(e).id] = 0.0;
  for (const PointResult& pr : res) {
    if (pr.abs_det < rep.min_abs_det) {
      rep.min_abs_det = pr.abs_det;
      rep.argmin = pr.omega;
    }
    for (std::size_t k = 0; k < rays.size(); ++k) {
      double& m = rep.max_abs_ratio[tree.edge(rays[k]).id];
      m = std::max(m, pr.abs_ratio[k]);
      rep.max_ratio = std::max(rep.max_ratio, pr.abs_ratio[k]);
      if (pr.omega.real() == 0.0) {
        double& ma = rep.max_axis_ratio[tree.edge(rays[k]).id];
        ma = std::max(ma, pr.abs_ratio[k]);
        rep.max_ratio_axis = std::max(rep.max_ratio_axis, pr.abs_ratio[k]);
      }
    }
  }
  rep.violation = rep.min_abs_det < 1e-10 || rep.max_ratio_axis >= 1.0;
  for (const Vertex& v : tree.vertices())
    if (!(v.alpha > 0.0)) {
      rep.note = "strengths not all positive; no bound is predicted";
      break;
    }
  return rep;
}

} // namespace

ScanReport strip_scan_serial(const MetricTree& tree, const StripGrid& grid) {
  const auto pts = strip_points(grid);
  const auto rays = tree.external_edges();
  std::vector<PointResult> res;
  res.reserve(pts.size());
  for (const cplx& w : pts) res.push_back(scan_point(tree, rays, w));
  return merge(tree, rays, res);
}

ScanReport strip_scan(const MetricTree& tree, const StripGrid& grid) {
  const auto pts = strip_points(grid);
  const auto rays = tree.external_edges();
  std::vector<PointResult> res(pts.size());
  const long n = static_cast<long>(pts.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) res[i] = scan_point(tree, rays, pts[i]);
  return merge(tree, rays, res);
}

PropertyReport appendix_a_checks(const MetricTree& tree) {
  for (const Vertex& v : tree.vertices())
    if (!(v.alpha > 0.0)) throw GraphError("property checks need positive strengths (vertex " + std::to_string(v.id) + ")");
  PropertyReport rep;
  rep.all_hold = true;
  const std::size_t p = tree.vertex_count();
  const int nodes = 1024;
  for (std::size_t q = 1; q <= p; ++q) {
    const MetricTree pre = construction_prefix(tree, q);
    const double r = origin_radius(pre);
    std::vector<cplx> num(nodes), den(nodes);
    for (int k = 0; k < nodes; ++k) {
      const cplx z = std::polar(r, 2.0 * std::numbers::pi * k / nodes);
      const RatioParts rp = stage_ratio_parts(tree, q, z);
      num[k] = rp.numerator;
      den[k] = rp.denominator;
    }
    StageProperties sp;
    sp.stage = q;
    double raw = 0.0;
    sp.zero_order = rounded_winding(den, raw);
    // Leading Taylor terms of numerator and denominator at the common order.
    const int m = sp.zero_order;
    const cplx n0 = contour::taylor_coefficient(num, r, m), n1 = contour::taylor_coefficient(num, r, m + 1);
    const cplx d0 = contour::taylor_coefficient(den, r, m), d1 = contour::taylor_coefficient(den, r, m + 1);
    sp.ratio_at_zero = n0 / d0;
    sp.ratio_derivative_at_zero = (n1 * d0 - n0 * d1) / (d0 * d0);
    sp.ratio_one = std::abs(sp.ratio_at_zero - 1.0) <= 1e-8;
    sp.derivative_negative = sp.ratio_derivative_at_zero.real() < 0.0;
    sp.order_ok = sp.zero_order == static_cast<int>(q) - 1;
    rep.all_hold = rep.all_hold && sp.ratio_one && sp.derivative_negative && sp.order_ok;
    rep.stages.push_back(sp);
  }
  return rep;
}

} // namespace qgraph
