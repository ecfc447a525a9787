#pragma once

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "qgraph/determinant.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

/// Point on the tree: edge index and coordinate along it.
struct SamplePoint {
  std::size_t edge = 0;
  double x = 0.0;
};

struct TauQuadrature {
  std::optional<double> tau_max;    ///< default max |k| + 8 / sigma
  double panel_scale = 1.0;         ///< > 1 narrows the panels
  std::optional<double> cauchy_rho; ///< radius of the Cauchy circle around tau = 0
};

struct EvolutionRequest {
  MetricTree tree;
  StateFunction u0;
  std::vector<double> times;
  std::vector<SamplePoint> samples;
  TauQuadrature quad;
  bool include_bound_part = true;
};

struct EvolutionResult {
  std::vector<double> times;
  std::vector<SamplePoint> samples;
  std::vector<std::vector<cplx>> values; ///< values[time][sample]
  double tau_max = 0.0;
  double rho = 0.0;
  std::size_t base_panels = 0;
};

/// Raised when det D vanishes at omega = 0 beyond the generic order p - 1.
class ResonanceRefusal : public GraphError {
public:
  ResonanceRefusal(const std::string& what, ResonanceReport rep) : GraphError(what), report_(rep) {}
  const ResonanceReport& report() const { return report_; }

private:
  ResonanceReport report_;
};

/// Exact free-line evolution of one packet under i u_t = -u_xx.
cplx free_packet(const Packet& p, double t, double x);

/// Integrals J_m = int_{-1}^{1} s^m exp(i (A s^2 + B s)) ds, m = 0..6, for |A| <= 1/2.
std::array<cplx, 7> oscillatory_moments(double A, double B);

/// Continuous-spectrum kernel of one initial datum:
/// u(t, x) = sum of free packets on the edge
///         + (1/pi) int e^{-i t tau^2} [g+(tau) e^{i tau x} + g-(tau) e^{-i tau x}] dtau,
/// with g+- = omega (c_e, c~_e)(omega) at omega = i tau. The tau integral is done
/// panel by panel with degree-6 interpolation of g+- and exact moments of the
/// quadratic phase.
class DispersiveKernel {
public:
  DispersiveKernel(const MetricTree& tree, const GraphFunction& packets, const TauQuadrature& quad = {});

  /// Builds the panel caches needed for these times. Must precede concurrent use.
  void prepare(const std::vector<double>& times);

  cplx value(double t, const SamplePoint& s) const;

  /// g+ and g- of every edge at real tau.
  std::pair<std::vector<cplx>, std::vector<cplx>> g(double tau) const;

  double tau_max() const { return tau_max_; }
  double rho() const { return rho_; }
  std::size_t base_panels() const { return base_panels_; }
  const ResonanceReport& condition() const { return cond_; }

private:
  struct Level {
    std::size_t panels = 0;
    double half = 0.0;
    std::vector<std::vector<std::array<cplx, 7>>> plus, minus; ///< [edge][panel] monomial coefficients
  };
  int level_for(double t) const;
  const Level& level(int L) const;
  std::pair<std::vector<cplx>, std::vector<cplx>> solve_at(cplx omega) const;

  MetricTree tree_;
  GraphFunction packets_;
  ResonanceReport cond_;
  double tau_max_ = 0.0;
  double h_data_ = 0.0;
  double rho_ = 0.0;
  std::size_t base_panels_ = 0;
  std::vector<std::vector<cplx>> circle_plus_, circle_minus_; ///< [node][edge]
  std::map<int, Level> levels_;
};

/// e^{-itH} P u0 on the sample grid (OpenMP over time x sample).
EvolutionResult evolve_dispersive(const EvolutionRequest& req);
/// Serial reference of evolve_dispersive.
EvolutionResult evolve_dispersive_serial(const EvolutionRequest& req);

/// e^{-itH} u0: dispersive part plus sum_k e^{i t omega_k^2} <u0, phi_k> phi_k.
EvolutionResult evolve_full(const EvolutionRequest& req, const SpectralData& spec);

/// Max relative change of evolve_dispersive when panels are halved and tau_max
/// grows by 1.5x.
double self_consistency(const EvolutionRequest& req);

struct DecayReport {
  std::vector<double> times;
  std::vector<double> sup;        ///< sup over the sample window
  std::vector<double> sqrt_t_sup; ///< sqrt(t) * sup
  std::vector<double> window;     ///< window length used on rays
  double beta = 0.0;              ///< fitted exponent, sup ~ C t^{-beta}
  double C = 0.0;
  double fit_residual = 0.0;      ///< rms of the log-log fit
  double l1_norm = 0.0;           ///< ||u0||_1
};

/// Sup norm over a moving window (>= `points_per_edge` per edge) and the log-log fit over t >= 1.
DecayReport decay_scan(const MetricTree& tree, const GraphFunction& u0, const std::vector<double>& times,
                       int points_per_edge = 400, const TauQuadrature& quad = {});

/// Rows t, edge id, x, Re u, Im u, |u|.
void write_samples_csv(std::ostream& os, const MetricTree& tree, const EvolutionResult& res);

} // namespace qgraph
