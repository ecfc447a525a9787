#include "qgraph/generators.hpp"

#include <random>

namespace qgraph {

MetricTree caterpillar(const std::vector<double>& alphas, const std::vector<double>& lengths,
                       const std::vector<int>& extra_rays) {
  const std::size_t p = alphas.size();
  if (p == 0) throw GraphError("caterpillar needs at least one vertex");
  if (lengths.size() + 1 != p) throw GraphError("caterpillar needs p - 1 lengths");
  auto extra = [&](std::size_t j) { return j < extra_rays.size() ? extra_rays[j] : 0; };
  MetricTree t = MetricTree::star(2 + extra(0), alphas[0]);
  int tail = t.edge(1).id; // the spine continues along this ray
  for (std::size_t j = 1; j < p; ++j) {
    t = attach_vertex(t, tail, lengths[j - 1], alphas[j], 2 + extra(j));
    tail = t.edges()[t.edge_count() - static_cast<std::size_t>(1 + extra(j))].id;
  }
  return t;
}

MetricTree random_tree(std::uint64_t seed, int p, const RandomTreeOptions& opt) {
  if (p < 1) throw GraphError("random_tree needs p >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ua(opt.alpha_min, opt.alpha_max), ul(opt.length_min, opt.length_max);
  std::uniform_int_distribution<int> un(opt.degree_min, opt.degree_max);
  MetricTree t = MetricTree::star(un(rng), ua(rng));
  for (int j = 1; j < p; ++j) {
    const auto rays = t.external_edges();
    std::uniform_int_distribution<std::size_t> ur(0, rays.size() - 1);
    const int eid = t.edge(rays[ur(rng)]).id;
    const double a = ul(rng), al = ua(rng);
    t = attach_vertex(t, eid, a, al, un(rng));
  }
  return t;
}

} // namespace qgraph
