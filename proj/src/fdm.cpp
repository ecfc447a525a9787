#include "qgraph/fdm.hpp"

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include <algorithm>
#include <cmath>

#include "qgraph/resolvent.hpp"

namespace qgraph {

DiscreteTree discretize(const MetricTree& tree, double h, double ray_length) {
  if (!(h > 0.0)) throw GraphError("grid spacing must be positive");
  double hmax = h;
  for (std::size_t e : tree.internal_edges()) hmax = std::min(hmax, tree.edge(e).length / 16.0);
  if (!(ray_length > 0.0) || !std::isfinite(ray_length)) throw GraphError("ray truncation length must be finite and positive");

  DiscreteTree dt;
  dt.tree = tree;
  dt.ray_length = ray_length;
  const std::size_t nv = tree.vertex_count();
  dt.mass.assign(nv, 0.0);
  long next = static_cast<long>(nv);
  std::vector<Eigen::Triplet<cplx>> trip;

  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    const Edge& edge = tree.edge(e);
    const double len = edge.infinite() ? ray_length : edge.length;
    const long n = std::max<long>(2, static_cast<long>(std::ceil(len / hmax)));
    const double he = len / static_cast<double>(n);
    dt.h.push_back(he);
    std::vector<long> idx(n + 1);
    idx[0] = static_cast<long>(tree.vertex_index(edge.from));
    for (long j = 1; j < n; ++j) idx[j] = next++;
    idx[n] = edge.infinite() ? -1 : static_cast<long>(tree.vertex_index(*edge.to));
    dt.mass.resize(next, 0.0);
    for (long j = 0; j < n; ++j) {
      const long a = idx[j], b = idx[j + 1];
      if (a >= 0) {
        dt.mass[a] += 0.5 * he;
        trip.emplace_back(a, a, 1.0 / he);
      }
      if (b >= 0) {
        dt.mass[b] += 0.5 * he;
        trip.emplace_back(b, b, 1.0 / he);
      }
      if (a >= 0 && b >= 0) {
        trip.emplace_back(a, b, -1.0 / he);
        trip.emplace_back(b, a, -1.0 / he);
      }
    }
    dt.nodes.push_back(std::move(idx));
  }
  for (std::size_t v = 0; v < nv; ++v) trip.emplace_back(v, v, tree.vertex(v).alpha);
  dt.K.resize(next, next);
  dt.K.setFromTriplets(trip.begin(), trip.end());
  dt.K.makeCompressed();
  return dt;
}

namespace {

double reach(const GraphFunction& u0, double& vmax) {
  double total = 0.0;
  vmax = 0.0;
  for (const auto& [id, ps] : u0.packets())
    for (const Packet& p : ps) {
      total = std::max(total, p.x0 + packet_tail_radius() * p.sigma);
      vmax = std::max(vmax, 2.0 * (std::abs(p.k) + 4.0 / p.sigma));
    }
  return total;
}

} // namespace

double truncation_length(const MetricTree& tree, const GraphFunction& u0, double t_max) {
  double v = 0.0;
  double R = reach(u0, v);
  for (std::size_t e : tree.internal_edges()) R += tree.edge(e).length;
  return 4.0 * (R + v * std::abs(t_max));
}

double safe_horizon(const DiscreteTree& dt, const GraphFunction& u0) {
  double v = 0.0;
  double R = reach(u0, v);
  for (std::size_t e : dt.tree.internal_edges()) R += dt.tree.edge(e).length;
  if (v == 0.0) return kInf;
  return std::max(0.0, dt.ray_length - R) / v;
}

std::vector<cplx> nodal(const DiscreteTree& dt, const StateFunction& f) {
  std::vector<cplx> u(dt.size(), 0.0);
  std::vector<bool> set(dt.size(), false);
  for (std::size_t e = 0; e < dt.nodes.size(); ++e)
    for (std::size_t j = 0; j < dt.nodes[e].size(); ++j) {
      const long k = dt.nodes[e][j];
      if (k < 0 || set[k]) continue;
      u[k] = f(dt.tree, e, dt.h[e] * static_cast<double>(j));
      set[k] = true;
    }
  return u;
}

std::vector<cplx> apply_h(const DiscreteTree& dt, const std::vector<cplx>& u) {
  const Eigen::Map<const VectorC> x(u.data(), static_cast<Eigen::Index>(u.size()));
  VectorC y = dt.K * x;
  std::vector<cplx> out(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) out[j] = y(j) / dt.mass[j];
  return out;
}

cplx discrete_inner(const DiscreteTree& dt, const std::vector<cplx>& u, const std::vector<cplx>& v) {
  cplx s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += dt.mass[j] * u[j] * std::conj(v[j]);
  return s;
}

double discrete_mass(const DiscreteTree& dt, const std::vector<cplx>& u) { return discrete_inner(dt, u, u).real(); }

CnStepper::CnStepper(const DiscreteTree& dt, double step) : grid_(dt), dt_(step) {
  if (!(step > 0.0)) throw GraphError("time step must be positive");
  SparseC M(dt.size(), dt.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (std::size_t j = 0; j < dt.size(); ++j) trip.emplace_back(j, j, dt.mass[j]);
  M.setFromTriplets(trip.begin(), trip.end());
  const cplx half(0.0, 0.5 * step);
  SparseC lhs = M + half * dt.K;
  rhs_ = M - half * dt.K;
  lu_ = std::make_shared<Eigen::SparseLU<SparseC>>();
  lu_->compute(lhs);
  if (lu_->info() != Eigen::Success) throw GraphError("Crank-Nicolson factorization failed");
}

namespace {

// Far tails of a packet underflow to subnormals inside the triangular solves,
// which slows a step down by ~20x. Flush them for the duration of the step.
struct FlushSubnormals {
#if defined(__SSE2__)
  unsigned int saved = _mm_getcsr();
  FlushSubnormals() { _mm_setcsr(saved | 0x8040u); } // FTZ | DAZ
  ~FlushSubnormals() { _mm_setcsr(saved); }
#endif
};

} // namespace

void CnStepper::step(std::vector<cplx>& u) const {
  const FlushSubnormals guard;
  Eigen::Map<VectorC> x(u.data(), static_cast<Eigen::Index>(u.size()));
  const VectorC b = rhs_ * x;
  x = lu_->solve(b);
}

std::vector<cplx> cn_step(const DiscreteTree& dt, const std::vector<cplx>& u, double step) {
  std::vector<cplx> out = u;
  CnStepper(dt, step).step(out);
  return out;
}

std::vector<std::vector<cplx>> evolve_cn(const DiscreteTree& dt, std::vector<cplx> u, const std::vector<double>& times,
                                         double step) {
  std::vector<std::vector<cplx>> out;
  double now = 0.0;
  for (double t : times) {
    if (t < now) throw GraphError("times must be ascending and non-negative");
    const long n = static_cast<long>(std::ceil((t - now) / step - 1e-9));
    if (n > 0) {
      const CnStepper cn(dt, (t - now) / static_cast<double>(n));
      for (long i = 0; i < n; ++i) cn.step(u);
    }
    now = t;
    out.push_back(u);
  }
  return out;
}

std::vector<cplx> evolve_cn(const DiscreteTree& dt, std::vector<cplx> u, double t, double step) {
  return evolve_cn(dt, std::move(u), std::vector<double>{t}, step).front();
}

cplx sample(const DiscreteTree& dt, const std::vector<cplx>& u, std::size_t edge, double x) {
  const auto& idx = dt.nodes.at(edge);
  const double he = dt.h[edge];
  const double len = he * static_cast<double>(idx.size() - 1);
  if (x < 0.0 || x > len + 1e-12) return 0.0;
  const std::size_t j = std::min(idx.size() - 2, static_cast<std::size_t>(x / he));
  const double f = x / he - static_cast<double>(j);
  auto at = [&](std::size_t k) { return idx[k] < 0 ? cplx(0.0) : u[idx[k]]; };
  return (1.0 - f) * at(j) + f * at(j + 1);
}

} // namespace qgraph

namespace qgraph {

OracleComparison oracle_compare(const MetricTree& tree, const GraphFunction& u0, const std::vector<double>& times,
                                const OracleOptions& opt) {
  if (times.empty()) throw GraphError("no comparison times");
  const double t_max = *std::max_element(times.begin(), times.end());
  OracleComparison out;
  out.times = times;
  out.ray_length = opt.ray_length.value_or(truncation_length(tree, u0, t_max));
  out.window = 0.5 * out.ray_length;
  const DiscreteTree grid = discretize(tree, opt.h, out.ray_length);
  out.horizon = safe_horizon(grid, u0);
  if (t_max > out.horizon)
    throw GraphError("t = " + std::to_string(t_max) + " is past the safe horizon " + std::to_string(out.horizon));

  bool bound = false;
  for (const Vertex& v : tree.vertices()) bound = bound || v.alpha < 0.0;
  SpectralData spec;
  if (bound) spec = find_eigenvalues(tree);

  EvolutionRequest req;
  req.tree = tree;
  req.u0 = StateFunction{u0, {}};
  req.times = times;
  req.quad = opt.quad;
  // comparison points are grid nodes, every `stride`-th one
  std::vector<std::pair<std::size_t, std::size_t>> node_of;
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    const long stride = std::max(1L, std::lround(opt.compare_step / grid.h[e]));
    const std::size_t n = grid.nodes[e].size();
    for (std::size_t j = 0; j < n; j += stride) {
      const double x = grid.h[e] * static_cast<double>(j);
      if (tree.edge(e).infinite() && x > out.window) break;
      req.samples.push_back(SamplePoint{e, x});
      node_of.emplace_back(e, j);
    }
  }
  out.propagator = evolve_full(req, spec);

  const std::vector<cplx> c0 = nodal(grid, req.u0);
  const double m0 = discrete_mass(grid, c0);
  const auto states = evolve_cn(grid, c0, times, opt.dt);
  out.oracle = out.propagator;
  for (std::size_t it = 0; it < times.size(); ++it) {
    out.mass_drift = std::max(out.mass_drift, std::abs(discrete_mass(grid, states[it]) - m0) / m0);
    double num = 0.0, den = 0.0;
    for (std::size_t is = 0; is < req.samples.size(); ++is) {
      const auto [e, j] = node_of[is];
      const long k = grid.nodes[e][j];
      const cplx f = k < 0 ? cplx(0.0) : states[it][k];
      out.oracle.values[it][is] = f;
      num += std::norm(out.propagator.values[it][is] - f);
      den += std::norm(out.propagator.values[it][is]);
    }
    out.rel_l2.push_back(den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
    out.max_rel_l2 = std::max(out.max_rel_l2, out.rel_l2.back());
  }
  return out;
}

} // namespace qgraph
