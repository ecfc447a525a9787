#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

namespace qgraph::contour {

using cplx = std::complex<double>;

/// Samples f at N equispaced points of the circle |z - center| = r.
template <class F>
std::vector<cplx> on_circle(F&& f, double r, int n, cplx center = 0.0) {
  std::vector<cplx> v(n);
  for (int k = 0; k < n; ++k) v[k] = f(center + std::polar(r, 2.0 * std::numbers::pi * k / n));
  return v;
}

/// Winding number of the sampled closed curve about the origin, from the sum
/// of phase increments (the trapezoid rule for (1/2 pi i) \oint f'/f).
/// Empty if a sample vanishes or consecutive phases jump by more than pi/2.
inline std::optional<double> winding(const std::vector<cplx>& vals) {
  double total = 0.0;
  const std::size_t n = vals.size();
  for (std::size_t k = 0; k < n; ++k) {
    const cplx a = vals[k], b = vals[(k + 1) % n];
    if (a == cplx(0.0) || b == cplx(0.0)) return std::nullopt;
    const double d = std::arg(b / a);
    if (std::abs(d) > 0.5 * std::numbers::pi) return std::nullopt;
    total += d;
  }
  return total / (2.0 * std::numbers::pi);
}

/// Taylor coefficient a_m of f at the circle center from circle samples:
/// a_m = (1/N) sum_k f(z_k) (r e^{i theta_k})^{-m}.
inline cplx taylor_coefficient(const std::vector<cplx>& vals, double r, int m) {
  const int n = static_cast<int>(vals.size());
  cplx s = 0.0;
  for (int k = 0; k < n; ++k) s += vals[k] * std::polar(std::pow(r, -m), -2.0 * std::numbers::pi * k * m / n);
  return s / static_cast<double>(n);
}

/// Value at an interior point z (|z - center| < r) by the trapezoid-rule
/// Cauchy integral; exponentially accurate for f analytic on a larger disk.
inline cplx cauchy_value(const std::vector<cplx>& vals, double r, cplx z, cplx center = 0.0) {
  const int n = static_cast<int>(vals.size());
  cplx s = 0.0;
  for (int k = 0; k < n; ++k) {
    const cplx zk = std::polar(r, 2.0 * std::numbers::pi * k / n);
    s += vals[k] * zk / (center + zk - z);
  }
  return s / static_cast<double>(n);
}

} // namespace qgraph::contour
