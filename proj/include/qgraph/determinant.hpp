#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qgraph/graph.hpp"

namespace qgraph {

/// det D(omega) with normalized flux rows, columns in construction order.
/// Throws at a normalization pole omega = -alpha(v).
cplx det_direct(const MetricTree& tree, cplx omega);

/// det D~(e) / det D, where D~(e) carries the growing exponential on ray e.
cplx ratio_direct(const MetricTree& tree, cplx omega, std::size_t ray);

/// det D(omega) * prod_v (omega + alpha(v)); entire in omega.
cplx cleared_det(const MetricTree& tree, cplx omega);

/// Subtree made of the first `q` vertices of the construction order. Edges to
/// later vertices become rays; ids are preserved.
MetricTree construction_prefix(const MetricTree& tree, std::size_t q);

struct DetState {
  cplx omega;
  cplx det;
  std::map<int, cplx> ratios;        ///< per ray id
  std::vector<int> recursive_rays;   ///< rays whose ratio came out of the recursion
  std::vector<cplx> stage_det;       ///< det of each construction prefix
  std::vector<cplx> stage_ratio;     ///< ratio on the newest rays of each prefix
  int column_flip_fallbacks = 0;     ///< attachments on rays not tracked by the recursion
};

/// Replays the construction order through the attachment recursion.
/// With `all_ratios` the rays not tracked by the recursion are filled in by
/// direct column-flip determinants.
DetState det_recursive(const MetricTree& tree, cplx omega, bool all_ratios = true);

/// Ratio of the newest rays of the q-th construction prefix, as the quotient
/// of cleared determinants (both entire in omega).
struct RatioParts {
  cplx numerator;
  cplx denominator;
};
RatioParts stage_ratio_parts(const MetricTree& tree, std::size_t q, cplx omega);

struct ResonanceReport {
  int zero_order = 0;
  int p = 0;
  bool condition_holds = false;
  cplx derivative_value;  ///< (p-1)-th derivative of the cleared determinant at 0
  double radius = 0.0;
  double winding_raw = 0.0;
};

class InconclusiveError : public GraphError {
public:
  using GraphError::GraphError;
};

/// Default contour radius min(0.1, min|alpha| / (2 |E|), 1/(2 max a)), |E| the
/// number of rays.
double origin_radius(const MetricTree& tree);

/// Order of the zero of the cleared determinant at omega = 0 by the argument
/// principle on |omega| = r (2048 nodes).
ResonanceReport zero_order_at_origin(const MetricTree& tree, std::optional<double> radius = std::nullopt,
                                     int nodes = 2048);

/// Zero order at 0 of det D itself: the winding of the cleared determinant
/// minus the number of zero-strength vertices (whose flux rows carry an extra
/// factor omega once cleared). Defined for any strengths; the radius uses the
/// nonzero ones only.
ResonanceReport dispersive_condition(const MetricTree& tree, int nodes = 2048);

/// Zero order at 0 of the coefficient of t_lambda in omega det M^{c_e}
/// (or M^{c~_e} when `tilde`), cleared of normalization poles. For an internal
/// lambda the coefficients of t_lambda(0) and t_lambda(a) are summed. Returns
/// -1 when the function vanishes identically on the contour.
int numerator_zero_order(const MetricTree& tree, std::size_t lambda, std::size_t edge, bool tilde,
                         std::optional<double> radius = std::nullopt, int nodes = 1024);

struct ScanReport {
  double min_abs_det = 0.0;
  cplx argmin;
  std::map<int, double> max_abs_ratio;  ///< per ray id, whole strip
  double max_ratio = 0.0;
  std::map<int, double> max_axis_ratio; ///< per ray id, points with Re omega = 0
  double max_ratio_axis = 0.0;
  std::size_t points = 0;
  bool violation = false;
  std::string note;
};

struct StripGrid {
  double delta = 0.5;
  double eps = 0.05;
  double tau_max = 20.0;
  int n_tau = 1000;  ///< per sign of tau
  int n_re = 5;
};

/// Minimum of |det D| and maximum of every ray ratio on
/// {s + i tau : |s| <= eps, delta <= |tau| <= tau_max}. The line s = 0 is
/// always sampled. A violation is |det D| < 1e-10 anywhere, or a ratio of
/// modulus >= 1 on the imaginary axis (off the axis e^{-2 omega a} grows and
/// the bound is not expected).
ScanReport strip_scan(const MetricTree& tree, const StripGrid& grid);
/// Serial reference of strip_scan.
ScanReport strip_scan_serial(const MetricTree& tree, const StripGrid& grid);

struct StageProperties {
  std::size_t stage = 0;
  cplx ratio_at_zero;
  cplx ratio_derivative_at_zero;
  int zero_order = 0;
  bool ratio_one = false;
  bool derivative_negative = false;
  bool order_ok = false;
};

struct PropertyReport {
  std::vector<StageProperties> stages;
  bool all_hold = false;
};

/// ratio(0) = 1, Re ratio'(0) < 0 and zero order q - 1 at every stage q.
PropertyReport appendix_a_checks(const MetricTree& tree);

} // namespace qgraph
