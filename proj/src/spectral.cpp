#include "qgraph/spectral.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/tools/roots.hpp>

#include "qgraph/determinant.hpp"
#include "qgraph/quadrature.hpp"
#include "qgraph/resolvent.hpp"

namespace qgraph {

cplx Eigenfunction::operator()(std::size_t edge, double x) const {
  return c[edge] * std::exp(omega * x) + ct[edge] * std::exp(-omega * x);
}

double default_omega_max(const MetricTree& tree) {
  double s = 1.0;
  for (const Vertex& v : tree.vertices()) s += std::max(0.0, -v.alpha);
  return s;
}

namespace {

// int_0^a e^{s x} dx
double expint(double s, double a) {
  if (std::isinf(a)) return s < 0.0 ? -1.0 / s : kInf;
  if (std::abs(s * a) < 1e-8) return a * (1.0 + 0.5 * s * a);
  return std::expm1(s * a) / s;
}

double profile_norm(const MetricTree& tree, const Eigenfunction& f) { return std::sqrt(std::max(0.0, inner(tree, f, f).real())); }

} // namespace

cplx inner(const MetricTree& tree, const Eigenfunction& f, const Eigenfunction& g) {
  const double w = f.omega, v = g.omega;
  cplx s = 0.0;
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    const double a = tree.edge(e).length;
    s += f.ct[e] * std::conj(g.ct[e]) * expint(-w - v, a);
    if (tree.edge(e).infinite()) continue;
    s += f.c[e] * std::conj(g.c[e]) * expint(w + v, a) + f.c[e] * std::conj(g.ct[e]) * expint(w - v, a) +
         f.ct[e] * std::conj(g.c[e]) * expint(v - w, a);
  }
  return s;
}

cplx inner(const MetricTree& tree, const GraphFunction& f, const Eigenfunction& g) {
  cplx s = 0.0;
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    const auto sup = packet_support(tree, f, e);
    if (!sup) continue;
    const int id = tree.edge(e).id;
    std::vector<double> breaks;
    double sig = kInf;
    for (const Packet& p : f.on_edge(id)) {
      breaks.push_back(p.x0);
      sig = std::min(sig, p.sigma);
    }
    s += quad::integrate([&](double x) { return f(id, x) * std::conj(g(e, x)); }, sup->first, sup->second, breaks, sig,
                         1e-13);
  }
  return s;
}

cplx inner(const MetricTree& tree, const GraphFunction& f, const GraphFunction& g) {
  cplx s = 0.0;
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    const auto sf = packet_support(tree, f, e), sg = packet_support(tree, g, e);
    if (!sf || !sg) continue;
    const double lo = std::max(sf->first, sg->first), hi = std::min(sf->second, sg->second);
    if (!(hi > lo)) continue;
    const int id = tree.edge(e).id;
    std::vector<double> breaks;
    double sig = kInf;
    for (const GraphFunction* h : {&f, &g})
      for (const Packet& p : h->on_edge(id)) {
        breaks.push_back(p.x0);
        sig = std::min(sig, p.sigma);
      }
    s += quad::integrate([&](double x) { return f(id, x) * std::conj(g(id, x)); }, lo, hi, breaks, sig, 1e-13);
  }
  return s;
}

Eigenfunction eigenfunction_at(const MetricTree& tree, double omega, double* simplicity) {
  const MatrixC D = system_matrix(tree, omega, FluxRow::Cleared);
  Eigen::JacobiSVD<MatrixC> svd(D, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Eigen::Index n = D.cols();
  if (simplicity) *simplicity = n >= 2 ? sv(n - 2) / sv(0) : 1.0;
  VectorC x = svd.matrixV().col(n - 1);
  Eigen::Index big = 0;
  x.cwiseAbs().maxCoeff(&big);
  x *= std::abs(x(big)) / x(big);

  const SystemLayout lay = make_layout(tree);
  Eigenfunction phi{omega, std::vector<cplx>(tree.edge_count(), 0.0), std::vector<cplx>(tree.edge_count(), 0.0)};
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    if (lay.c_col[e]) phi.c[e] = x(*lay.c_col[e]);
    phi.ct[e] = x(lay.ct_col[e]);
  }
  const double nrm = profile_norm(tree, phi);
  for (auto& v : phi.c) v /= nrm;
  for (auto& v : phi.ct) v /= nrm;
  return phi;
}

SpectralData find_eigenvalues(const MetricTree& tree, const SpectrumOptions& opt) {
  for (const Vertex& v : tree.vertices())
    if (v.alpha == 0.0) throw GraphError("eigenvalue search needs nonzero strengths (vertex " + std::to_string(v.id) + ")");
  const double lo = opt.omega_min, hi = opt.omega_max.value_or(default_omega_max(tree));
  if (!(hi > lo) || opt.scan_points < 2) throw GraphError("bad eigenvalue bracket");

  const int n = opt.scan_points;
  std::vector<double> grid(n + 1), f(n + 1);
#pragma omp parallel for schedule(static)
  for (int i = 0; i <= n; ++i) {
    grid[i] = lo + (hi - lo) * i / n;
    f[i] = cleared_det(tree, grid[i]).real();
  }

  auto F = [&](double w) { return cleared_det(tree, w).real(); };
  auto stop = [&](double a, double b) { return b - a <= opt.tol; };
  std::vector<double> roots;
  for (int i = 0; i < n; ++i) {
    if (f[i] == 0.0) {
      roots.push_back(grid[i]);
    } else if (f[i] * f[i + 1] < 0.0) {
      auto [a, b] = boost::math::tools::bisect(F, grid[i], grid[i + 1], stop);
      roots.push_back(0.5 * (a + b));
    }
  }
  if (f[n] == 0.0) roots.push_back(grid[n]);

  SpectralData sd;
  for (double w : roots) {
    double simple = 0.0;
    Eigenfunction phi = eigenfunction_at(tree, w, &simple);
    if (simple < 1e-6)
      throw DegenerateRootError("near-degenerate eigenvalue at omega=" + std::to_string(w) + ", refine the scan");
    sd.omegas.push_back(w);
    sd.l2_norms.push_back(profile_norm(tree, phi));
    sd.simplicity.push_back(simple);
    sd.eigenfunctions.push_back(std::move(phi));
  }
  return sd;
}

cplx StateFunction::operator()(const MetricTree& tree, std::size_t edge, double x) const {
  cplx s = packets(tree.edge(edge).id, x);
  for (const BoundComponent& b : bound) s += b.weight * b.phi(edge, x);
  return s;
}

cplx inner(const MetricTree& tree, const StateFunction& f, const Eigenfunction& g) {
  cplx s = inner(tree, f.packets, g);
  for (const BoundComponent& b : f.bound) s += b.weight * inner(tree, b.phi, g);
  return s;
}

double l2_norm(const MetricTree& tree, const StateFunction& f) {
  double s = inner(tree, f.packets, f.packets).real();
  for (const BoundComponent& b : f.bound) {
    s += 2.0 * (std::conj(b.weight) * inner(tree, f.packets, b.phi)).real();
    for (const BoundComponent& d : f.bound) s += (b.weight * std::conj(d.weight) * inner(tree, b.phi, d.phi)).real();
  }
  return std::sqrt(std::max(0.0, s));
}

StateFunction project_out(const MetricTree& tree, const StateFunction& f, const SpectralData& spec) {
  StateFunction out = f;
  for (const Eigenfunction& phi : spec.eigenfunctions) {
    const cplx w = -inner(tree, f, phi);
    auto same = std::find_if(out.bound.begin(), out.bound.end(), [&](const BoundComponent& b) {
      return b.phi.omega == phi.omega && b.phi.c == phi.c && b.phi.ct == phi.ct;
    });
    if (same != out.bound.end())
      same->weight += w;
    else
      out.bound.push_back(BoundComponent{w, phi});
  }
  return out;
}

StateFunction project_out(const MetricTree& tree, const GraphFunction& f, const SpectralData& spec) {
  return project_out(tree, StateFunction{f, {}}, spec);
}

EigenDefects eigen_defects(const MetricTree& tree, const Eigenfunction& phi) {
  EigenDefects d;
  const double w = phi.omega;
  for (std::size_t v = 0; v < tree.vertex_count(); ++v) {
    std::vector<cplx> val, der;
    for (std::size_t e : tree.incident(v)) {
      const Edge& edge = tree.edge(e);
      if (tree.vertex_index(edge.from) == v) {
        val.push_back(phi.c[e] + phi.ct[e]);
        der.push_back(w * (phi.c[e] - phi.ct[e]));
      } else {
        const double E = std::exp(w * edge.length), Ei = std::exp(-w * edge.length);
        val.push_back(phi.c[e] * E + phi.ct[e] * Ei);
        der.push_back(-w * (phi.c[e] * E - phi.ct[e] * Ei));
      }
    }
    cplx flux = -tree.vertex(v).alpha * val[0];
    for (std::size_t k = 0; k < val.size(); ++k) {
      d.continuity = std::max(d.continuity, std::abs(val[k] - val[0]));
      flux += der[k];
    }
    d.flux = std::max(d.flux, std::abs(flux));
  }
  return d;
}

} // namespace qgraph
