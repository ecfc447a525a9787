#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgraph {

using cplx = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised for malformed graphs, bad arguments and other contract violations.
class GraphError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Vertex {
  int id = 0;
  double alpha = 0.0; ///< delta strength
};

struct Edge {
  int id = 0;
  int from = 0;               ///< initial vertex id
  std::optional<int> to;      ///< terminal vertex id, empty for a ray
  double length = kInf;

  bool infinite() const { return !to.has_value(); }
};

/// One attachment step: a new vertex is placed at distance `a` on the ray
/// `edge_id` and `n - 1` new rays leave it.
struct AttachStep {
  int edge_id = 0;
  double a = 0.0;
  double alpha = 0.0;
  int n = 2;
};

/// Rooted metric tree with delta strengths at the vertices.
///
/// Immutable once built. Edges are oriented away from the root, rays start at
/// their only vertex. The construction order (root star first, then one vertex
/// per attachment) is kept because the determinant recursion replays it.
class MetricTree {
public:
  MetricTree() = default;
  MetricTree(std::vector<Vertex> vertices, std::vector<Edge> edges, int root);

  /// One vertex with `n` rays.
  static MetricTree star(int n, double alpha, int vertex_id = 0);

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int root_id() const { return root_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  std::size_t vertex_index(int id) const;
  std::size_t edge_index(int id) const;
  bool has_vertex(int id) const { return vindex_.count(id) != 0; }
  bool has_edge(int id) const { return eindex_.count(id) != 0; }

  const Vertex& vertex(std::size_t idx) const { return vertices_.at(idx); }
  const Edge& edge(std::size_t idx) const { return edges_.at(idx); }

  /// Edge indices incident to vertex `v` (index), reference edge first:
  /// for the root its outgoing edges, otherwise the incoming edge followed by
  /// the outgoing ones, each group by increasing index.
  const std::vector<std::size_t>& incident(std::size_t v) const { return incident_.at(v); }
  std::size_t degree(std::size_t v) const { return incident_.at(v).size(); }

  /// Vertex indices in construction order (root first, parents before children).
  const std::vector<std::size_t>& construction_order() const { return order_; }
  /// Incoming edge index of a non-root vertex.
  std::optional<std::size_t> parent_edge(std::size_t v) const { return parent_edge_.at(v); }

  /// Attachment steps recorded through attach_vertex or a graph file.
  const std::vector<AttachStep>& recorded_build() const { return build_; }

  std::vector<std::size_t> internal_edges() const;
  std::vector<std::size_t> external_edges() const;

  /// Number of resolvent unknowns, 2|I| + |E|.
  std::size_t unknown_count() const;

  double max_internal_length() const;

private:
  friend MetricTree attach_vertex(const MetricTree&, int, double, double, int);
  void index();

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  int root_ = 0;
  std::map<int, std::size_t> vindex_;
  std::map<int, std::size_t> eindex_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<std::optional<std::size_t>> parent_edge_;
  std::vector<std::size_t> order_;
  std::vector<AttachStep> build_;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool valid() const { return violations.empty(); }
};

ValidationReport validate_tree(const MetricTree& tree);

/// Places a new vertex of strength `alpha` at distance `a` on ray `edge_id`
/// and adds `n - 1` rays from it.
MetricTree attach_vertex(const MetricTree& tree, int edge_id, double a, double alpha, int n);

/// 0 if `vertex_id` is the initial vertex of `edge_id`, the edge length if it
/// is the terminal one.
double edge_coordinate(const MetricTree& tree, int vertex_id, int edge_id);

/// A(x) = amp * exp(-(x - x0)^2 / (2 sigma^2) + i k x)
struct Packet {
  cplx amp{1.0, 0.0};
  double x0 = 0.0;
  double sigma = 1.0;
  double k = 0.0;

  cplx operator()(double x) const;
};

/// Per-edge sums of Gaussian wave packets, keyed by edge id.
class GraphFunction {
public:
  GraphFunction() = default;
  explicit GraphFunction(std::map<int, std::vector<Packet>> packets);

  const std::map<int, std::vector<Packet>>& packets() const { return packets_; }
  std::span<const Packet> on_edge(int edge_id) const;
  bool empty() const;

  cplx operator()(int edge_id, double x) const;

  GraphFunction scaled(cplx factor) const;
  GraphFunction plus(const GraphFunction& other) const;

private:
  std::map<int, std::vector<Packet>> packets_;
};

/// Half-width, in units of sigma, beyond which a packet envelope is below
/// 1e-14 of its peak.
double packet_tail_radius();

/// Interval of edge `e` that carries all packet mass above the tail threshold,
/// clipped to the edge. Empty optional if the edge carries no packets.
std::optional<std::pair<double, double>> packet_support(const MetricTree& tree,
                                                        const GraphFunction& f,
                                                        std::size_t e);

/// L^p norm over the tree, p in {1, 2, inf}.
double lp_norm(const MetricTree& tree, const GraphFunction& f, double p);

} // namespace qgraph
