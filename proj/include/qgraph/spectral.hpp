#pragma once

#include <optional>
#include <vector>

#include "qgraph/graph.hpp"

namespace qgraph {

/// c_e e^{omega x} + c~_e e^{-omega x} on every edge (c_e = 0 on rays).
struct Eigenfunction {
  double omega = 0.0;
  std::vector<cplx> c;
  std::vector<cplx> ct;

  cplx operator()(std::size_t edge, double x) const;
};

struct SpectralData {
  std::vector<double> omegas; ///< eigenvalue -omega_k^2
  std::vector<Eigenfunction> eigenfunctions;
  std::vector<double> l2_norms;
  std::vector<double> simplicity; ///< second smallest / largest singular value of D(omega_k)
};

struct SpectrumOptions {
  double omega_min = 1e-6;
  std::optional<double> omega_max;  ///< default sum_v max(0, -alpha) + 1
  int scan_points = 10000;
  double tol = 1e-12;
};

class DegenerateRootError : public GraphError {
public:
  using GraphError::GraphError;
};

/// Positive real zeros of the cleared determinant with normalized eigenfunctions.
SpectralData find_eigenvalues(const MetricTree& tree, const SpectrumOptions& opt = {});

double default_omega_max(const MetricTree& tree);

/// Normalized eigenfunction of D(omega) from its smallest singular direction.
/// `simplicity` receives sigma_{n-1} / sigma_0.
Eigenfunction eigenfunction_at(const MetricTree& tree, double omega, double* simplicity = nullptr);

/// <f, g> = sum_e int f conj(g), in closed form for exponential profiles.
cplx inner(const MetricTree& tree, const Eigenfunction& f, const Eigenfunction& g);
cplx inner(const MetricTree& tree, const GraphFunction& f, const Eigenfunction& g);
cplx inner(const MetricTree& tree, const GraphFunction& f, const GraphFunction& g);

struct BoundComponent {
  cplx weight;
  Eigenfunction phi;
};

/// Packets plus a finite combination of eigenfunctions.
struct StateFunction {
  GraphFunction packets;
  std::vector<BoundComponent> bound;

  cplx operator()(const MetricTree& tree, std::size_t edge, double x) const;
};

cplx inner(const MetricTree& tree, const StateFunction& f, const Eigenfunction& g);
double l2_norm(const MetricTree& tree, const StateFunction& f);

/// P f = f - sum_k <f, phi_k> phi_k.
StateFunction project_out(const MetricTree& tree, const StateFunction& f, const SpectralData& spec);
StateFunction project_out(const MetricTree& tree, const GraphFunction& f, const SpectralData& spec);

struct EigenDefects {
  double continuity = 0.0;
  double flux = 0.0;
};

/// Coupling defects of an exponential profile, from exact values and derivatives.
EigenDefects eigen_defects(const MetricTree& tree, const Eigenfunction& phi);

} // namespace qgraph
