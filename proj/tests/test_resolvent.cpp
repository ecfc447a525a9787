#include <doctest.h>

#include <sstream>

#include "qgraph/generators.hpp"
#include "qgraph/resolvent.hpp"

using namespace qgraph;

TEST_CASE("star matrix") {
  MatrixC D = system_matrix(MetricTree::star(3, 1.0), 1.0, FluxRow::Normalized);
  MatrixC E(3, 3);
  E << 1, -1, 0, 0, 1, -1, 1, 0.5, 0.5;
  CHECK((D - E).norm() < 1e-15);
  MatrixC C = system_matrix(MetricTree::star(3, 1.0), 1.0, FluxRow::Cleared);
  CHECK((C.row(2) - 2.0 * E.row(2)).norm() < 1e-15);
}

TEST_CASE("two-vertex matrix entries") {
  // Attachment row of vertex 1: continuity then normalized flux.
  const double a = 0.7, al = 1.3;
  const cplx w(0.9, 0.2);
  MetricTree t = attach_vertex(MetricTree::star(2, 0.5), 1, a, al, 2);
  MatrixC D = system_matrix(t, w, FluxRow::Normalized);
  SystemLayout lay = make_layout(t);
  REQUIRE(lay.size == 4);
  const std::size_t fr = lay.first_row[1] + 1;
  CHECK(std::abs(D(fr, *lay.c_col[1]) - std::exp(w * a)) < 1e-14);
  CHECK(std::abs(D(fr, lay.ct_col[1]) - (al - w) / (w + al) * std::exp(-w * a)) < 1e-14);
  CHECK(std::abs(D(fr, lay.ct_col[2]) - w / (w + al)) < 1e-14);
}

TEST_CASE("free line transmits") {
  MetricTree t = MetricTree::star(2, 0.0);
  GraphFunction u0({{0, {Packet{1.0, 10.0, 1.0, 0.3}}}});
  const cplx w(0.8, 0.3);
  ResolventSolution sol = resolvent(t, u0, w);
  const cplx t0 = t_integral(t, u0, 0, w, 0.0);
  CHECK(std::abs(sol.ct[0]) < 1e-13);
  CHECK(std::abs(sol.ct[1] - t0 / w) < 1e-13);
  // Whole-line Green function e^{-w|x-y|}/(2w) seen from the other half line.
  CHECK(std::abs(evaluate_resolvent(sol, 1, 2.0) - std::exp(-2.0 * w) * t0 / w) < 1e-13);
}

TEST_CASE("closed-form sources agree with quadrature") {
  MetricTree t = caterpillar({1.0, 2.0}, {30.0});
  GraphFunction u0({{0, {Packet{cplx(1.0, 0.5), 12.0, 1.2, -0.8}}}, {1, {Packet{2.0, 15.0, 1.0, 1.1}}}});
  require_contained(t, u0);
  const cplx w(0.3, 1.7);
  EdgeSources q = sources_by_quadrature(t, u0, w), c = sources_closed_form(t, u0, w);
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    CHECK(std::abs(q.t0[e] - c.t0[e]) < 1e-12);
    CHECK(std::abs(q.ta[e] - c.ta[e]) < 1e-12);
  }
  GraphFunction bad({{1, {Packet{1.0, 2.0, 1.0, 0.0}}}});
  CHECK_THROWS_AS(require_contained(t, bad), GraphError);
}

TEST_CASE("resolvent satisfies the equation and the couplings") {
  MetricTree t = caterpillar({1.0, -0.5, 2.0}, {3.0, 2.5}, {1, 0, 0});
  GraphFunction u0({{1, {Packet{1.0, 1.5, 0.4, 2.0}}}, {3, {Packet{cplx(0.0, 1.0), 5.0, 1.0, -1.0}}}});
  const cplx w(0.7, 0.9);
  ResolventSolution sol = resolvent(t, u0, w);
  CHECK(sol.residual < 1e-14);
  CouplingDefects d = coupling_defects(sol);
  CHECK(d.continuity < 1e-12);
  CHECK(d.flux < 1e-7);
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    const double x = t.edge(e).infinite() ? 4.0 : 0.5 * t.edge(e).length;
    CHECK(std::abs(residual_check(sol, e, x)) < 1e-5);
  }
  CHECK(cramer_defect(assemble_system(t, w, u0)) < 1e-12);
}

TEST_CASE("eigenvalue makes the system singular") {
  // 2w + alpha = 0 at w = 1 for alpha = -2.
  MetricTree t = MetricTree::star(2, -2.0);
  GraphFunction u0({{0, {Packet{1.0, 10.0, 1.0, 0.0}}}});
  CHECK_THROWS_AS(resolvent(t, u0, 1.0), SingularSystemError);
  CHECK_THROWS_AS(assemble_system(t, 0.0, u0), GraphError);
}

TEST_CASE("csv dump") {
  std::ostringstream os;
  write_system_csv(os, assemble_system(MetricTree::star(2, 1.0), 1.0, GraphFunction()));
  CHECK(os.str() == "1,0,-1,0,0,0\n1,0,0.5,0,0,0\n");
}
