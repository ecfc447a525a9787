#include <doctest.h>

#include <random>

#include "qgraph/couplings.hpp"
#include "qgraph/generators.hpp"
#include "qgraph/spectral.hpp"

using namespace qgraph;

namespace {

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// A = M Q cos(th) Q^T, B = M Q sin(th) Q^T with M invertible, Q orthogonal.
Coupling random_coupling(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixR M = MatrixR::NullaryExpr(d, d, [&] { return u(rng); }) + 2.0 * MatrixR::Identity(d, d);
  Eigen::HouseholderQR<MatrixR> qr(MatrixR::NullaryExpr(d, d, [&] { return u(rng); }));
  const MatrixR Q = qr.householderQ();
  Eigen::VectorXd th(d);
  for (int i = 0; i < d; ++i) th(i) = 1.5 * u(rng);
  const MatrixR A = M * Q * th.array().cos().matrix().asDiagonal() * Q.transpose();
  const MatrixR B = M * Q * th.array().sin().matrix().asDiagonal() * Q.transpose();
  return Coupling::general(A, B);
}

CouplingSpec random_spec(const MetricTree& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CouplingSpec s;
  for (std::size_t v = 0; v < t.vertex_count(); ++v) s[t.vertex(v).id] = random_coupling(static_cast<int>(t.degree(v)), rng);
  return s;
}

cplx det_of_flip(const MetricTree& t, const CouplingSpec& s, cplx w, std::size_t ray) {
  return general_matrix(t, s, w, ray).partialPivLu().determinant() / det_general(t, s, w);
}

} // namespace

TEST_CASE("self-adjointness check") {
  const auto [A, B] = delta_matrices(3, 1.5);
  CHECK(A(0, 0) == 1.0);
  CHECK(A(0, 1) == -1.0);
  CHECK(A(2, 2) == -1.5);
  CHECK(B.row(2).sum() == 3.0);
  CHECK(B.topRows(2).norm() == 0.0);
  CHECK(check_self_adjoint(A, B).ok);

  MatrixR C(3, 3);
  C << 2, 1, 0, -1, 3, 1, 0.5, 0, 1;
  const SelfAdjointReport r = check_self_adjoint(C * A, C * B);
  CHECK(r.ok);
  CHECK(r.rank == 3);

  CHECK_FALSE(check_self_adjoint(MatrixR::Zero(2, 2), MatrixR::Identity(2, 2) * 0.0).ok);
  MatrixR N(2, 2);
  N << 0, 1, 0, 0;
  CHECK_FALSE(check_self_adjoint(MatrixR::Identity(2, 2), N).ok);
  CHECK_THROWS_AS(check_self_adjoint(MatrixR::Identity(2, 2), MatrixR::Identity(3, 3)), GraphError);
  CHECK_THROWS_AS(delta_matrices(1, 1.0), GraphError);

  std::mt19937_64 rng(3);
  for (int d = 2; d <= 4; ++d) {
    const Coupling c = random_coupling(d, rng);
    CHECK(check_self_adjoint(c.A, c.B).ok);
  }
}

TEST_CASE("delta couplings reproduce the delta determinant") {
  for (const MetricTree& t : {MetricTree::star(3, 1.2), caterpillar({1.0, -0.5, 2.0}, {1.0, 0.7}), random_tree(11, 4)}) {
    const cplx k0 = det_general(t, {}, cplx(0.7, 0.3)) / cleared_det(t, cplx(0.7, 0.3));
    CHECK(std::abs(std::abs(k0) - 1.0) < 1e-12);
    for (cplx w : {cplx(1.3), cplx(0.1, 2.0), cplx(-0.4, 5.0)}) CHECK(rel(det_general(t, {}, w) / cleared_det(t, w), k0) < 1e-11);

    CouplingSpec explicit_delta;
    for (std::size_t v = 0; v < t.vertex_count(); ++v) explicit_delta[t.vertex(v).id] = Coupling::delta(t.vertex(v).alpha);
    CHECK(rel(det_general(t, explicit_delta, 0.9), det_general(t, {}, 0.9)) < 1e-14);
  }
}

TEST_CASE("Dirichlet star decouples the rays") {
  const MetricTree t = MetricTree::star(3, 0.0);
  const CouplingSpec s{{0, Coupling::general(MatrixR::Identity(3, 3), MatrixR::Zero(3, 3))}};
  GraphFunction u0({{0, {Packet{1.0, 3.0, 0.8, 0.5}}}, {2, {Packet{cplx(0.0, 2.0), 4.0, 1.0, -1.0}}}});
  const cplx w(0.6, 1.4);
  const ResolventSystem sys = assemble_general(t, s, w, u0);
  const VectorC ct = sys.D.partialPivLu().solve(sys.T);
  const EdgeSources src = sources_by_quadrature(t, u0, w);
  for (std::size_t e = 0; e < 3; ++e) CHECK(std::abs(ct(sys.layout.ct_col[e]) + src.t0[e] / w) < 1e-13);
  const DetState st = det_recursive_general(t, s, w);
  for (const auto& [id, r] : st.ratios) CHECK(std::abs(r - 1.0) < 1e-15);

  const ConditionScan scan = sufficient_condition_scan(t, s);
  CHECK(scan.plausible);
  CHECK(std::abs(scan.min_abs_det - 1.0) < 1e-12);
  CHECK(scan.removed_power == 0);
}

TEST_CASE("general recursion matches the direct determinant") {
  SUBCASE("random couplings, two vertices") {
    const MetricTree t = caterpillar({1.0, 1.0}, {1.3});
    const CouplingSpec s = random_spec(t, 5);
    for (cplx w : {cplx(0.8), cplx(0.2, 3.0), cplx(1.5, -0.7)}) {
      const DetState st = det_recursive_general(t, s, w);
      CHECK(rel(st.det, det_general(t, s, w)) < 1e-11);
      for (std::size_t e : t.external_edges())
        CHECK(rel(st.ratios.at(t.edge(e).id), det_of_flip(t, s, w, e)) < 1e-10);
    }
  }
  SUBCASE("random trees") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
      const MetricTree t = random_tree(seed, 5);
      const CouplingSpec s = random_spec(t, seed + 100);
      const cplx w(0.3, 1.7);
      const DetState st = det_recursive_general(t, s, w);
      CHECK(rel(st.det, det_general(t, s, w)) < 1e-10);
      CHECK(st.stage_det.size() == 5);
    }
  }
  SUBCASE("delta couplings through the general path") {
    const MetricTree t = random_tree(9, 4);
    const cplx w(0.5, 2.0);
    CHECK(rel(det_recursive_general(t, {}, w).det, det_general(t, {}, w)) < 1e-11);
  }
}

TEST_CASE("sufficient condition scan") {
  SUBCASE("Kirchhoff on two vertices") {
    const MetricTree t = caterpillar({0.0, 0.0}, {1.0});
    const ConditionScan scan = sufficient_condition_scan(t, {});
    CHECK(scan.removed_power == 2);
    CHECK(scan.plausible);
  }
  SUBCASE("delta with p = 2 degenerates at the origin") {
    const MetricTree t = caterpillar({1.0, 2.0}, {1.0});
    const ConditionScan scan = sufficient_condition_scan(t, {});
    CHECK_FALSE(scan.plausible);
    CHECK(std::abs(scan.tau_at_min) < 1e-6);
  }
  SUBCASE("single delta") {
    const ConditionScan scan = sufficient_condition_scan(MetricTree::star(2, 1.0), {});
    CHECK(scan.plausible);
    CHECK(std::abs(scan.min_abs_det - 1.0) < 1e-6);
  }
}

TEST_CASE("eigenvalues through the general path") {
  for (const MetricTree& t : {MetricTree::star(3, -3.0), caterpillar({-2.0, -1.5}, {1.0}), caterpillar({-2.5, 0.5, -1.0}, {0.8, 1.4})}) {
    const SpectralData sd = find_eigenvalues(t);
    const std::vector<double> w = general_eigenvalues(t, {}, default_omega_max(t));
    REQUIRE(w.size() == sd.omegas.size());
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(w[i] - sd.omegas[i]) < 1e-10);
  }
}
