#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/graph.hpp"

namespace qgraph {

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

/// Column and row bookkeeping of the resolvent system.
///
/// Columns follow the construction order: the root star contributes the c~
/// unknowns of its edges, every later vertex contributes c of its incoming
/// edge and then c~ of its outgoing edges. Rows: per vertex in the same order,
/// d(v) - 1 continuity rows followed by one flux row.
struct SystemLayout {
  std::vector<std::optional<std::size_t>> c_col; ///< per edge, empty for rays
  std::vector<std::size_t> ct_col;               ///< per edge
  std::vector<std::size_t> first_row;            ///< per vertex
  std::size_t size = 0;
};

SystemLayout make_layout(const MetricTree& tree);

/// How the flux row of each vertex is scaled.
enum class FluxRow {
  Normalized, ///< divided by (omega + alpha), first entry of the star row is 1
  Cleared,    ///< multiplied back by (omega + alpha), entire in omega
};

/// Values t_e(0, w) and t_e(l_e, w) per edge (the latter only for finite edges).
struct EdgeSources {
  std::vector<cplx> t0;
  std::vector<cplx> ta;
};

EdgeSources zero_sources(const MetricTree& tree);

/// Sources by adaptive quadrature of the packets, valid for any packet placement.
EdgeSources sources_by_quadrature(const MetricTree& tree, const GraphFunction& u0, cplx omega);

/// Closed-form sources; every packet must sit inside its edge (see
/// require_contained). Used where many frequencies are needed.
EdgeSources sources_closed_form(const MetricTree& tree, const GraphFunction& u0, cplx omega);

/// Throws unless each packet's envelope at both ends of its edge is below
/// `rel_tail` of its peak.
void require_contained(const MetricTree& tree, const GraphFunction& u0, double rel_tail = 1e-8);

/// t_e(x, w) = 1/2 int_{I_e} u0(y) exp(-w |x - y|) dy.
cplx t_integral(const MetricTree& tree, const GraphFunction& u0, std::size_t edge, cplx omega, double x);

struct ResolventSystem {
  cplx omega;
  MatrixC D;
  VectorC T;
  SystemLayout layout;
  FluxRow form = FluxRow::Normalized;
};

/// Assembles D and the free-term column T. With `scaled_free_terms` the
/// column holds omega * T, which stays finite at omega = 0.
///
/// `flipped_ray` swaps the decaying exponential of that ray for the growing
/// one (the tilde matrices of the determinant recursion).
ResolventSystem assemble_rows(const MetricTree& tree, cplx omega, const EdgeSources& src, FluxRow form,
                              bool scaled_free_terms = false, std::optional<std::size_t> flipped_ray = std::nullopt);

/// Normalized system for data u0 (sources by quadrature).
ResolventSystem assemble_system(const MetricTree& tree, cplx omega, const GraphFunction& u0);

/// Coefficient matrix only.
MatrixC system_matrix(const MetricTree& tree, cplx omega, FluxRow form,
                      std::optional<std::size_t> flipped_ray = std::nullopt);

class SingularSystemError : public GraphError {
public:
  SingularSystemError(const std::string& what, double rcond) : GraphError(what), rcond_(rcond) {}
  double rcond() const { return rcond_; }

private:
  double rcond_;
};

struct ResolventSolution {
  cplx omega;
  std::vector<cplx> c;  ///< per edge, zero on rays
  std::vector<cplx> ct; ///< per edge
  MetricTree tree;
  GraphFunction u0;
  double residual = 0.0; ///< |D x - T| / (|D| |x| + |T|)
};

/// Dense LU with partial pivoting.
ResolventSolution solve_resolvent(const ResolventSystem& sys, const MetricTree& tree, const GraphFunction& u0);

/// Convenience: assemble and solve.
ResolventSolution resolvent(const MetricTree& tree, const GraphFunction& u0, cplx omega);

/// c_e e^{wx} + c~_e e^{-wx} + t_e(x, w) / w.
cplx evaluate_resolvent(const ResolventSolution& sol, std::size_t edge, double x);

/// -(R u0)'' + w^2 R u0 - u0 at an interior point, by a 5-point stencil with h = 1e-3.
cplx residual_check(const ResolventSolution& sol, std::size_t edge, double x);

/// Derivative of R u0 along `edge` pointing away from vertex `v`, evaluated at
/// the vertex by a fourth-order one-sided stencil.
cplx outgoing_derivative(const ResolventSolution& sol, std::size_t edge, std::size_t v);

struct CouplingDefects {
  double continuity = 0.0; ///< max_v max_e |R(v from e) - R(v from ref)| / (1 + |R(v)|)
  double flux = 0.0;       ///< max_v |sum_e dR/dn - alpha R(v)|
};

CouplingDefects coupling_defects(const ResolventSolution& sol);

/// max over unknowns of |x_j det D - det(D with column j replaced by T)| / |det(D_j)|-scale.
double cramer_defect(const ResolventSystem& sys);

/// Row-major "re,im" CSV dump of D followed by T as the last column.
void write_system_csv(std::ostream& os, const ResolventSystem& sys);

} // namespace qgraph
