#pragma once

#include <cstdint>
#include <vector>

#include "qgraph/graph.hpp"

namespace qgraph {

/// Line of deltas: vertex j carries alphas[j]; consecutive vertices are
/// lengths[j] apart; every vertex gets `extra_rays[j]` additional rays (0 if
/// the vector is short). The result has a recorded build.
MetricTree caterpillar(const std::vector<double>& alphas, const std::vector<double>& lengths,
                       const std::vector<int>& extra_rays = {});

struct RandomTreeOptions {
  double alpha_min = 0.5, alpha_max = 2.0;
  double length_min = 0.5, length_max = 2.0;
  int degree_min = 2, degree_max = 3;
};

/// p vertices grown by attaching to uniformly chosen rays.
MetricTree random_tree(std::uint64_t seed, int p, const RandomTreeOptions& opt = {});

} // namespace qgraph
