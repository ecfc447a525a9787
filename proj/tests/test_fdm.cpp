#include <doctest.h>

#include <random>

#include "qgraph/fdm.hpp"
#include "qgraph/generators.hpp"
#include "qgraph/propagator.hpp"

using namespace qgraph;

TEST_CASE("discrete H is self-adjoint") {
  const DiscreteTree d = discretize(caterpillar({1.0, -0.5, 2.0}, {1.0, 0.6}, {1, 0, 0}), 0.05, 5.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<cplx> u(d.size()), v(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) {
    u[j] = {n(rng), n(rng)};
    v[j] = {n(rng), n(rng)};
  }
  const cplx a = discrete_inner(d, apply_h(d, u), v), b = discrete_inner(d, u, apply_h(d, v));
  CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
}

TEST_CASE("Kirchhoff degree-2 vertex is a plain grid point") {
  const DiscreteTree d = discretize(MetricTree::star(2, 0.0), 0.1, 3.0);
  const double h = d.h[0];
  CHECK(d.mass[0] == doctest::Approx(h));
  CHECK(std::abs(d.K.coeff(0, 0) - 2.0 / h) < 1e-12);
  CHECK(std::abs(d.K.coeff(0, d.nodes[0][1]) + 1.0 / h) < 1e-12);
  CHECK(std::abs(d.K.coeff(0, d.nodes[1][1]) + 1.0 / h) < 1e-12);
}

TEST_CASE("Crank-Nicolson conserves mass") {
  const MetricTree t = caterpillar({1.0, -1.0}, {2.0});
  const GraphFunction u0({{0, {Packet{1.0, 5.0, 1.0, -1.0}}}});
  const DiscreteTree d = discretize(t, 0.05, 30.0);
  std::vector<cplx> u = nodal(d, StateFunction{u0, {}});
  const double m0 = discrete_mass(d, u);
  const CnStepper cn(d, 0.01);
  for (int i = 0; i < 50; ++i) {
    const double before = discrete_mass(d, u);
    cn.step(u);
    CHECK(std::abs(discrete_mass(d, u) - before) <= 1e-12 * m0);
  }
}

TEST_CASE("second order on the free line") {
  const MetricTree t = MetricTree::star(2, 0.0);
  const Packet p{1.0, 8.0, 1.0, 0.5};
  const GraphFunction u0({{0, {p}}});
  const double L = truncation_length(t, u0, 1.0);
  auto error = [&](double h, double dt) {
    const DiscreteTree d = discretize(t, h, L);
    CHECK(safe_horizon(d, u0) > 1.0);
    const auto u = evolve_cn(d, nodal(d, StateFunction{u0, {}}), 1.0, dt);
    double e = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double x = 0.05 * i;
      e = std::max({e, std::abs(sample(d, u, 0, x) - free_packet(p, 1.0, x)), std::abs(sample(d, u, 1, x) - free_packet(p, 1.0, -x))});
    }
    return e;
  };
  const double e1 = error(0.05, 0.01), e2 = error(0.025, 0.005);
  CHECK(std::log2(e1 / e2) >= 1.9);
}

TEST_CASE("bound state stays put") {
  const MetricTree t = MetricTree::star(2, -2.0);
  const SpectralData sd = find_eigenvalues(t);
  const DiscreteTree d = discretize(t, 0.005, 20.0);
  const std::vector<cplx> u0 = nodal(d, StateFunction{GraphFunction(), {BoundComponent{1.0, sd.eigenfunctions[0]}}});
  const std::vector<cplx> u = evolve_cn(d, u0, 1.0, 0.005);
  double e = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) e = std::max(e, std::abs(std::abs(u[j]) - std::abs(u0[j])));
  CHECK(e < 1e-4);
}
