#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace qgraph::quad {

/// Adaptive Gauss-Kronrod over [a, b], split at the sorted `breaks` that fall
/// inside and into pieces no longer than `max_piece`.
template <class F>
auto integrate(F&& f, double a, double b, std::vector<double> breaks = {},
               double max_piece = 0.0, double tol = 1e-12) {
  using R = decltype(f(a));
  R total{};
  if (!(b > a)) return total;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> pts;
  for (double x : breaks)
    if (x >= a && x <= b && (pts.empty() || x > pts.back())) pts.push_back(x);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double lo = pts[i], hi = pts[i + 1];
    int pieces = 1;
    if (max_piece > 0.0) pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_piece)));
    double w = (hi - lo) / pieces;
    for (int j = 0; j < pieces; ++j) {
      double x0 = lo + j * w;
      double x1 = (j + 1 == pieces) ? hi : x0 + w;
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, x0, x1, 12, tol);
    }
  }
  return total;
}

} // namespace qgraph::quad
