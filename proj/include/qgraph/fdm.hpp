#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "qgraph/propagator.hpp"

namespace qgraph {

using SparseC = Eigen::SparseMatrix<cplx>;

/// Uniform grid on every edge; rays are cut at `ray_length` with a zero
/// boundary value. Each vertex is one shared node.
struct DiscreteTree {
  MetricTree tree;
  double ray_length = 0.0;
  std::vector<double> h;                        ///< spacing per edge
  std::vector<std::vector<long>> nodes;         ///< per edge, unknown index of x_j = j h (-1: Dirichlet end)
  std::vector<double> mass;                     ///< lumped mass per unknown
  SparseC K;                                    ///< stiffness + alpha at vertex nodes
  std::size_t size() const { return mass.size(); }
};

/// Grid with spacing at most `h` (and at most min internal length / 16).
DiscreteTree discretize(const MetricTree& tree, double h, double ray_length);

/// Ray length 4 (R + v t_max) for packets of support radius R and top group
/// velocity v = 2 max(|k| + 4 / sigma).
double truncation_length(const MetricTree& tree, const GraphFunction& u0, double t_max);

/// Time before the fastest significant component reaches the cut.
double safe_horizon(const DiscreteTree& dt, const GraphFunction& u0);

std::vector<cplx> nodal(const DiscreteTree& dt, const StateFunction& f);

/// H_h u = M^{-1} K u.
std::vector<cplx> apply_h(const DiscreteTree& dt, const std::vector<cplx>& u);

/// <u, v>_M = sum_j m_j u_j conj(v_j)
cplx discrete_inner(const DiscreteTree& dt, const std::vector<cplx>& u, const std::vector<cplx>& v);
double discrete_mass(const DiscreteTree& dt, const std::vector<cplx>& u);

/// Crank-Nicolson stepper (M + i dt/2 K) u+ = (M - i dt/2 K) u, factored once.
class CnStepper {
public:
  CnStepper(const DiscreteTree& dt, double step);
  void step(std::vector<cplx>& u) const;
  double dt() const { return dt_; }

private:
  const DiscreteTree& grid_;
  double dt_;
  SparseC rhs_;
  std::shared_ptr<Eigen::SparseLU<SparseC>> lu_;
};

std::vector<cplx> cn_step(const DiscreteTree& dt, const std::vector<cplx>& u, double step);

/// Evolves to time t with steps of at most `step`; returns the state at t.
std::vector<cplx> evolve_cn(const DiscreteTree& dt, std::vector<cplx> u, double t, double step);

/// States at each requested time (ascending).
std::vector<std::vector<cplx>> evolve_cn(const DiscreteTree& dt, std::vector<cplx> u, const std::vector<double>& times,
                                         double step);

/// Linear interpolation of a grid function at a point of the tree.
cplx sample(const DiscreteTree& dt, const std::vector<cplx>& u, std::size_t edge, double x);

struct OracleOptions {
  double h = 1.0 / 64.0;
  double dt = 1.0 / 128.0;
  std::optional<double> ray_length;  ///< default truncation_length
  double compare_step = 0.05;        ///< spacing of the comparison points
  TauQuadrature quad;
};

struct OracleComparison {
  std::vector<double> times;
  std::vector<double> rel_l2;   ///< ||u_prop - u_cn|| / ||u_prop|| on the comparison window
  double max_rel_l2 = 0.0;
  double ray_length = 0.0;
  double window = 0.0;          ///< rays are compared on [0, window]
  double horizon = 0.0;
  double mass_drift = 0.0;      ///< max relative change of the discrete mass
  EvolutionResult propagator;
  EvolutionResult oracle;       ///< CN values at the same sample points
};

/// Evolves u0 with the propagator (bound part included) and with
/// Crank-Nicolson, and compares them on the grid nodes with x <= L / 2 on rays.
/// Throws if the last time exceeds the safe horizon.
OracleComparison oracle_compare(const MetricTree& tree, const GraphFunction& u0, const std::vector<double>& times,
                                const OracleOptions& opt = {});

} // namespace qgraph
