#include "qgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "qgraph/quadrature.hpp"

namespace qgraph {

MetricTree::MetricTree(std::vector<Vertex> vertices, std::vector<Edge> edges, int root)
    : vertices_(std::move(vertices)), edges_(std::move(edges)), root_(root) {
  index();
}

MetricTree MetricTree::star(int n, double alpha, int vertex_id) {
  if (n < 1) throw GraphError("star needs at least one edge");
  std::vector<Edge> edges;
  for (int j = 0; j < n; ++j) edges.push_back(Edge{j, vertex_id, std::nullopt, kInf});
  return MetricTree({Vertex{vertex_id, alpha}}, std::move(edges), vertex_id);
}

void MetricTree::index() {
  vindex_.clear();
  eindex_.clear();
  for (std::size_t i = 0; i < vertices_.size(); ++i)
    if (!vindex_.emplace(vertices_[i].id, i).second)
      throw GraphError("duplicate vertex id " + std::to_string(vertices_[i].id));
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (!eindex_.emplace(edges_[i].id, i).second)
      throw GraphError("duplicate edge id " + std::to_string(edges_[i].id));
  if (!vindex_.count(root_)) throw GraphError("root vertex " + std::to_string(root_) + " does not exist");
  for (const Edge& e : edges_) {
    if (!vindex_.count(e.from))
      throw GraphError("edge " + std::to_string(e.id) + " starts at unknown vertex " + std::to_string(e.from));
    if (e.to && !vindex_.count(*e.to))
      throw GraphError("edge " + std::to_string(e.id) + " ends at unknown vertex " + std::to_string(*e.to));
  }

  const std::size_t nv = vertices_.size();
  parent_edge_.assign(nv, std::nullopt);
  incident_.assign(nv, {});

  // Breadth-first search over internal edges, ignoring their stored direction.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nv);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (!e.to) continue;
    std::size_t a = vindex_.at(e.from), b = vindex_.at(*e.to);
    adj[a].push_back({b, i});
    adj[b].push_back({a, i});
  }
  const std::size_t r = vindex_.at(root_);
  std::vector<bool> seen(nv, false);
  std::queue<std::size_t> bfs;
  bfs.push(r);
  seen[r] = true;
  while (!bfs.empty()) {
    std::size_t v = bfs.front();
    bfs.pop();
    for (auto [w, ei] : adj[v]) {
      if (seen[w]) continue;
      seen[w] = true;
      parent_edge_[w] = ei;
      bfs.push(w);
    }
  }

  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      bool touches = vindex_.at(e.from) == v || (e.to && vindex_.at(*e.to) == v);
      if (touches && parent_edge_[v] != i) rest.push_back(i);
    }
    if (parent_edge_[v]) incident_[v].push_back(*parent_edge_[v]);
    incident_[v].insert(incident_[v].end(), rest.begin(), rest.end());
  }

  // Parents before children, otherwise by increasing index.
  order_.clear();
  std::vector<bool> placed(nv, false);
  std::set<std::size_t> ready{r};
  while (!ready.empty()) {
    std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    placed[v] = true;
    order_.push_back(v);
    for (auto [w, ei] : adj[v])
      if (!placed[w] && seen[w] && parent_edge_[w] == ei) ready.insert(w);
  }
}

std::size_t MetricTree::vertex_index(int id) const {
  auto it = vindex_.find(id);
  if (it == vindex_.end()) throw GraphError("unknown vertex id " + std::to_string(id));
  return it->second;
}

std::size_t MetricTree::edge_index(int id) const {
  auto it = eindex_.find(id);
  if (it == eindex_.end()) throw GraphError("unknown edge id " + std::to_string(id));
  return it->second;
}

std::vector<std::size_t> MetricTree::internal_edges() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (!edges_[i].infinite()) out.push_back(i);
  return out;
}

std::vector<std::size_t> MetricTree::external_edges() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (edges_[i].infinite()) out.push_back(i);
  return out;
}

std::size_t MetricTree::unknown_count() const {
  std::size_t n = 0;
  for (const Edge& e : edges_) n += e.infinite() ? 1 : 2;
  return n;
}

double MetricTree::max_internal_length() const {
  double m = 0.0;
  for (const Edge& e : edges_)
    if (!e.infinite()) m = std::max(m, e.length);
  return m;
}

ValidationReport validate_tree(const MetricTree& tree) {
  ValidationReport rep;
  auto add = [&](std::string s) { rep.violations.push_back(std::move(s)); };
  const std::size_t nv = tree.vertex_count();

  std::size_t internal = 0;
  for (const Edge& e : tree.edges()) {
    std::string tag = "edge " + std::to_string(e.id) + ": ";
    if (e.infinite()) {
      if (!std::isinf(e.length) || e.length < 0) add(tag + "ray must have infinite length");
    } else {
      ++internal;
      if (!(e.length > 0.0) || !std::isfinite(e.length)) add(tag + "finite edge length must be positive");
      if (*e.to == e.from) add(tag + "self-loop");
    }
  }
  for (const Vertex& v : tree.vertices())
    if (!std::isfinite(v.alpha)) add("vertex " + std::to_string(v.id) + ": strength must be finite");

  std::size_t reached = tree.construction_order().size();
  if (reached != nv) add("graph is not connected through finite edges");
  if (internal + 1 != nv) add("finite edges do not form a tree (expected " + std::to_string(nv - 1) +
                              ", found " + std::to_string(internal) + ")");

  for (std::size_t v = 0; v < nv; ++v) {
    std::size_t d = tree.degree(v);
    if (d == 1) add("vertex " + std::to_string(tree.vertex(v).id) + ": external vertex present (degree 1)");
    if (d == 0) add("vertex " + std::to_string(tree.vertex(v).id) + ": isolated vertex");
  }

  // Orientation away from the root.
  for (std::size_t v = 0; v < nv; ++v) {
    auto pe = tree.parent_edge(v);
    if (!pe) continue;
    const Edge& e = tree.edge(*pe);
    if (!e.to || tree.vertex_index(*e.to) != v)
      add("edge " + std::to_string(e.id) + ": not oriented away from the root");
  }
  return rep;
}

MetricTree attach_vertex(const MetricTree& tree, int edge_id, double a, double alpha, int n) {
  const std::size_t ei = tree.edge_index(edge_id);
  if (!tree.edge(ei).infinite()) throw GraphError("attach_vertex: edge " + std::to_string(edge_id) + " is not infinite");
  if (!(a > 0.0) || !std::isfinite(a)) throw GraphError("attach_vertex: cut length must be finite and positive");
  if (n < 2) throw GraphError("attach_vertex: new vertex needs degree n >= 2");

  std::vector<Vertex> vs = tree.vertices();
  std::vector<Edge> es = tree.edges();
  int vid = 0, eid = 0;
  for (const Vertex& v : vs) vid = std::max(vid, v.id + 1);
  for (const Edge& e : es) eid = std::max(eid, e.id + 1);

  vs.push_back(Vertex{vid, alpha});
  es[ei].to = vid;
  es[ei].length = a;
  for (int j = 0; j < n - 1; ++j) es.push_back(Edge{eid + j, vid, std::nullopt, kInf});

  MetricTree out(std::move(vs), std::move(es), tree.root_id());
  out.build_ = tree.build_;
  out.build_.push_back(AttachStep{edge_id, a, alpha, n});
  return out;
}

double edge_coordinate(const MetricTree& tree, int vertex_id, int edge_id) {
  const Edge& e = tree.edge(tree.edge_index(edge_id));
  tree.vertex_index(vertex_id);
  if (e.from == vertex_id) return 0.0;
  if (e.to && *e.to == vertex_id) return e.length;
  throw GraphError("vertex " + std::to_string(vertex_id) + " is not an endpoint of edge " + std::to_string(edge_id));
}

cplx Packet::operator()(double x) const {
  double z = (x - x0) / sigma;
  return amp * std::exp(cplx(-0.5 * z * z, k * x));
}

GraphFunction::GraphFunction(std::map<int, std::vector<Packet>> packets) : packets_(std::move(packets)) {
  for (const auto& [id, ps] : packets_)
    for (const Packet& p : ps)
      if (!(p.sigma > 0.0)) throw GraphError("packet on edge " + std::to_string(id) + " has non-positive width");
}

std::span<const Packet> GraphFunction::on_edge(int edge_id) const {
  auto it = packets_.find(edge_id);
  if (it == packets_.end()) return {};
  return it->second;
}

bool GraphFunction::empty() const {
  for (const auto& [id, ps] : packets_)
    for (const Packet& p : ps)
      if (p.amp != cplx(0.0)) return false;
  return true;
}

cplx GraphFunction::operator()(int edge_id, double x) const {
  cplx s = 0.0;
  for (const Packet& p : on_edge(edge_id)) s += p(x);
  return s;
}

GraphFunction GraphFunction::scaled(cplx factor) const {
  auto ps = packets_;
  for (auto& [id, list] : ps)
    for (Packet& p : list) p.amp *= factor;
  return GraphFunction(std::move(ps));
}

GraphFunction GraphFunction::plus(const GraphFunction& other) const {
  auto ps = packets_;
  for (const auto& [id, list] : other.packets_) ps[id].insert(ps[id].end(), list.begin(), list.end());
  return GraphFunction(std::move(ps));
}

double packet_tail_radius() {
  static const double r = std::sqrt(2.0 * std::log(1e14));
  return r;
}

std::optional<std::pair<double, double>> packet_support(const MetricTree& tree, const GraphFunction& f,
                                                        std::size_t e) {
  const Edge& edge = tree.edge(e);
  auto ps = f.on_edge(edge.id);
  if (ps.empty()) return std::nullopt;
  double lo = kInf, hi = -kInf;
  const double r = packet_tail_radius();
  for (const Packet& p : ps) {
    if (p.amp == cplx(0.0)) continue;
    lo = std::min(lo, p.x0 - r * p.sigma);
    hi = std::max(hi, p.x0 + r * p.sigma);
  }
  lo = std::max(lo, 0.0);
  hi = std::min(hi, edge.length);
  if (!(hi > lo)) return std::nullopt;
  return std::make_pair(lo, hi);
}

namespace {

std::vector<double> packet_breaks(std::span<const Packet> ps) {
  std::vector<double> b;
  for (const Packet& p : ps) b.push_back(p.x0);
  return b;
}

double min_sigma(std::span<const Packet> ps) {
  double s = kInf;
  for (const Packet& p : ps) s = std::min(s, p.sigma);
  return s;
}

} // namespace

double lp_norm(const MetricTree& tree, const GraphFunction& f, double p) {
  if (!(p == 1.0 || p == 2.0 || std::isinf(p))) throw GraphError("lp_norm: p must be 1, 2 or infinity");
  double acc = 0.0;
  for (std::size_t e = 0; e < tree.edge_count(); ++e) {
    auto sup = packet_support(tree, f, e);
    if (!sup) continue;
    const int id = tree.edge(e).id;
    auto ps = f.on_edge(id);
    const double sig = min_sigma(ps);
    if (std::isinf(p)) {
      // Dense scan, then local refinement of the best sample.
      const double step = sig / 16.0;
      const int n = static_cast<int>(std::ceil((sup->second - sup->first) / step));
      double best = -1.0, bx = sup->first;
      for (int i = 0; i <= n; ++i) {
        double x = std::min(sup->first + i * step, sup->second);
        double v = std::abs(f(id, x));
        if (v > best) { best = v; bx = x; }
      }
      auto neg = [&](double x) { return -std::abs(f(id, x)); };
      double lo = std::max(sup->first, bx - step), hi = std::min(sup->second, bx + step);
      auto [xm, fm] = boost::math::tools::brent_find_minima(neg, lo, hi, 50);
      acc = std::max(acc, std::max(best, -fm));
    } else {
      auto integrand = [&](double x) { return std::pow(std::abs(f(id, x)), p); };
      acc += quad::integrate(integrand, sup->first, sup->second, packet_breaks(ps), 2.0 * sig, 1e-13);
    }
  }
  return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

} // namespace qgraph
