#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/determinant.hpp"
#include "qgraph/resolvent.hpp"

namespace qgraph {

using MatrixR = Eigen::MatrixXd;

/// Vertex condition A u(v) + B u'(v) = 0 with u' the outgoing derivatives, in
/// the order of MetricTree::incident(v).
struct Coupling {
  enum class Kind { Delta, General } kind = Kind::Delta;
  double alpha = 0.0;
  MatrixR A, B;

  static Coupling delta(double alpha) { return Coupling{Kind::Delta, alpha, {}, {}}; }
  static Coupling general(MatrixR A, MatrixR B) { return Coupling{Kind::General, 0.0, std::move(A), std::move(B)}; }
};

/// Per vertex id; vertices not listed use the delta strength stored in the tree.
using CouplingSpec = std::map<int, Coupling>;

struct SelfAdjointReport {
  bool ok = false;
  int rank = 0;
  double commutator = 0.0; ///< max |A B^T - B A^T|
};

SelfAdjointReport check_self_adjoint(const MatrixR& A, const MatrixR& B);

/// Continuity rows u_i - u_{i+1} and the flux row sum u' - alpha u_d.
std::pair<MatrixR, MatrixR> delta_matrices(int d, double alpha);

/// (A, B) used at vertex v; throws on a size mismatch or an invalid pair.
std::pair<MatrixR, MatrixR> vertex_matrices(const MetricTree& tree, const CouplingSpec& spec, std::size_t v);

/// Raw rows A values + B derivatives = -(free part), same column layout as the
/// delta path. `flipped_ray` switches that ray's column to the growing exponential.
MatrixC general_matrix(const MetricTree& tree, const CouplingSpec& spec, cplx omega,
                       std::optional<std::size_t> flipped_ray = std::nullopt);

ResolventSystem assemble_general(const MetricTree& tree, const CouplingSpec& spec, cplx omega, const GraphFunction& u0);

cplx det_general(const MetricTree& tree, const CouplingSpec& spec, cplx omega);

/// Attachment recursion with S = A - omega B on decaying columns and
/// S^ = A + omega B on growing ones.
DetState det_recursive_general(const MetricTree& tree, const CouplingSpec& spec, cplx omega, bool all_ratios = true);

struct ConditionScan {
  double min_abs_det = 0.0;
  double tau_at_min = 0.0;
  int removed_power = 0;  ///< omega^m divided out (rank deficiency of the A(v))
  bool plausible = false; ///< min >= threshold on the grid
  std::size_t points = 0;
  std::string verdict;
};

/// min over tau of |det D(i tau)| / |tau|^m on a grid that is logarithmic
/// near 0 and uniform up to tau_max. A grid scan, not a proof.
ConditionScan sufficient_condition_scan(const MetricTree& tree, const CouplingSpec& spec, double tau_max = 20.0,
                                        int n_uniform = 4000, double threshold = 1e-6);

/// Positive real zeros of det_general (bracketing scan + bisection).
std::vector<double> general_eigenvalues(const MetricTree& tree, const CouplingSpec& spec, double omega_max,
                                        int scan_points = 10000);

} // namespace qgraph
