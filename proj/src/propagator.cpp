#include "qgraph/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>

#include "qgraph/contour.hpp"
#include "qgraph/resolvent.hpp"

namespace qgraph {

namespace {

constexpr int kDeg = 6;
constexpr int kCauchyNodes = 64;
const cplx I(0.0, 1.0);

// Chebyshev nodes on [-1, 1] and the inverse Vandermonde matrix that maps
// values there to monomial coefficients.
struct Interp {
  std::array<double, kDeg + 1> s;
  Eigen::Matrix<double, kDeg + 1, kDeg + 1> vinv;
  Interp() {
    Eigen::Matrix<double, kDeg + 1, kDeg + 1> V;
    for (int j = 0; j <= kDeg; ++j) {
      s[j] = std::cos((2 * j + 1) * std::numbers::pi / (2 * (kDeg + 1)));
      for (int m = 0; m <= kDeg; ++m) V(j, m) = std::pow(s[j], m);
    }
    vinv = V.inverse();
  }
};

const Interp& interp() {
  static const Interp in;
  return in;
}

template <int N>
std::array<cplx, 7> moments_gauss(double A, double B) {
  using G = boost::math::quadrature::gauss<double, N>;
  std::array<cplx, 7> J{};
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  auto add = [&](double s, double wt) {
    cplx f = wt * std::exp(I * (A * s * s + B * s));
    for (int m = 0; m <= kDeg; ++m) {
      J[m] += f;
      f *= s;
    }
  };
  // Boost stores the non-negative half of the symmetric rule.
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      add(0.0, w[i]);
    } else {
      add(x[i], w[i]);
      add(-x[i], w[i]);
    }
  }
  return J;
}

} // namespace

cplx free_packet(const Packet& p, double t, double x) {
  const double s2 = p.sigma * p.sigma;
  const cplx spread = s2 + 2.0 * I * t;
  const double y = x - p.x0 - 2.0 * p.k * t;
  return p.amp * std::sqrt(s2 / spread) * std::exp(-y * y / (2.0 * spread) + I * p.k * (x - p.k * t));
}

std::array<cplx, 7> oscillatory_moments(double A, double B) {
  const double size = std::abs(A) + std::abs(B);
  if (size <= 2.0) return moments_gauss<20>(A, B);
  if (size <= 10.0) return moments_gauss<30>(A, B);
  if (size <= 40.0) return moments_gauss<100>(A, B);
  if (std::abs(A) > 0.5) throw GraphError("oscillatory_moments: |A| must not exceed 1/2");

  // e^{iAs^2} = sum_j (iA)^j s^{2j} / j!, and K_n = int s^n e^{iBs} ds by the
  // upward recursion K_n = ([s^n e^{iBs}]_{-1}^{1} - n K_{n-1}) / (iB), stable for |B| > n.
  constexpr int kTerms = 16;
  constexpr int kMax = kDeg + 2 * kTerms;
  std::array<cplx, kMax + 1> K{};
  const cplx ep = std::exp(I * B), em = std::exp(-I * B);
  K[0] = (ep - em) / (I * B);
  for (int n = 1; n <= kMax; ++n) {
    const cplx edge = ep - (n % 2 == 0 ? em : -em);
    K[n] = (edge - static_cast<double>(n) * K[n - 1]) / (I * B);
  }
  std::array<cplx, 7> J{};
  for (int m = 0; m <= kDeg; ++m) {
    cplx term = 1.0;
    for (int j = 0; j < kTerms; ++j) {
      J[m] += term * K[m + 2 * j];
      term *= I * A / static_cast<double>(j + 1);
    }
  }
  return J;
}

DispersiveKernel::DispersiveKernel(const MetricTree& tree, const GraphFunction& packets, const TauQuadrature& quad)
    : tree_(tree), packets_(packets) {
  cond_ = dispersive_condition(tree_);
  if (!cond_.condition_holds)
    throw ResonanceRefusal("resonance: det D vanishes to order " + std::to_string(cond_.zero_order) +
                               " at omega = 0, expected " + std::to_string(cond_.p - 1),
                           cond_);
  require_contained(tree_, packets_);
  if (!(quad.panel_scale > 0.0)) throw GraphError("panel scale must be positive");

  double tm = 0.0, freq = 1.0, total = 0.0;
  for (std::size_t e : tree_.internal_edges()) total += tree_.edge(e).length;
  for (const auto& [id, ps] : packets_.packets()) {
    const Edge& e = tree_.edge(tree_.edge_index(id));
    for (const Packet& p : ps) {
      const double reach = std::abs(p.k) + 8.0 / p.sigma;
      tm = std::max(tm, reach);
      const double pos = e.infinite() ? p.x0 : std::max(p.x0, e.length - p.x0);
      freq = std::max(freq, 1.0 + 2.0 * total + pos + p.sigma * p.sigma * reach);
    }
  }
  tau_max_ = quad.tau_max.value_or(tm > 0.0 ? tm : 1.0);
  if (!(tau_max_ > 0.0)) throw GraphError("tau_max must be positive");
  h_data_ = 0.45 / freq / quad.panel_scale;
  base_panels_ = static_cast<std::size_t>(std::ceil(2.0 * tau_max_ / h_data_));

  // det D(i tau) vanishes at tau = 0 whenever the cleared determinant does:
  // values there come from a Cauchy integral on a circle free of other zeros.
  int zero = 0;
  for (const Vertex& v : tree_.vertices()) zero += v.alpha == 0.0;
  const int order = cond_.p - 1 + zero;
  if (order > 0) {
    rho_ = quad.cauchy_rho.value_or(0.25);
    for (;;) {
      const auto vals = contour::on_circle([&](cplx z) { return cleared_det(tree_, z); }, 2.0 * rho_, 256);
      const auto w = contour::winding(vals);
      if (w && std::abs(*w - order) < 0.01) break;
      if (quad.cauchy_rho || rho_ < 1e-4) throw GraphError("no zero-free circle around omega = 0 for the Cauchy evaluation");
      rho_ *= 0.5;
    }
    for (int k = 0; k < kCauchyNodes; ++k) {
      auto [p, m] = solve_at(std::polar(rho_, 2.0 * std::numbers::pi * k / kCauchyNodes));
      circle_plus_.push_back(std::move(p));
      circle_minus_.push_back(std::move(m));
    }
  }
}

std::pair<std::vector<cplx>, std::vector<cplx>> DispersiveKernel::solve_at(cplx omega) const {
  const ResolventSystem sys =
      assemble_rows(tree_, omega, sources_closed_form(tree_, packets_, omega), FluxRow::Cleared, true);
  const VectorC x = sys.D.partialPivLu().solve(sys.T);
  std::vector<cplx> p(tree_.edge_count(), 0.0), m(tree_.edge_count(), 0.0);
  for (std::size_t e = 0; e < tree_.edge_count(); ++e) {
    if (sys.layout.c_col[e]) p[e] = x(*sys.layout.c_col[e]);
    m[e] = x(sys.layout.ct_col[e]);
  }
  return {p, m};
}

std::pair<std::vector<cplx>, std::vector<cplx>> DispersiveKernel::g(double tau) const {
  if (rho_ > 0.0 && std::abs(tau) < 0.5 * rho_) {
    const cplx z = I * tau;
    std::vector<cplx> p(tree_.edge_count(), 0.0), m(tree_.edge_count(), 0.0);
    for (int k = 0; k < kCauchyNodes; ++k) {
      const cplx zk = std::polar(rho_, 2.0 * std::numbers::pi * k / kCauchyNodes);
      const cplx w = zk / (zk - z) / static_cast<double>(kCauchyNodes);
      for (std::size_t e = 0; e < tree_.edge_count(); ++e) {
        p[e] += w * circle_plus_[k][e];
        m[e] += w * circle_minus_[k][e];
      }
    }
    return {p, m};
  }
  return solve_at(I * tau);
}

int DispersiveKernel::level_for(double t) const {
  if (t == 0.0) throw GraphError("t = 0 is excluded");
  const double hmax = std::sqrt(2.0 / std::abs(t));
  int L = 0;
  while (2.0 * tau_max_ / (static_cast<double>(base_panels_) * std::ldexp(1.0, L)) > hmax) ++L;
  return L;
}

void DispersiveKernel::prepare(const std::vector<double>& times) {
  if (packets_.empty()) return;
  const Interp& in = interp();
  const std::size_t ne = tree_.edge_count();
  for (double t : times) {
    const int L = level_for(t);
    if (levels_.count(L)) continue;
    Level lv;
    lv.panels = base_panels_ << L;
    lv.half = tau_max_ / static_cast<double>(lv.panels);
    lv.plus.assign(ne, std::vector<std::array<cplx, 7>>(lv.panels));
    lv.minus = lv.plus;
    std::vector<std::pair<std::vector<cplx>, std::vector<cplx>>> vals(lv.panels * (kDeg + 1));
    const long nv = static_cast<long>(vals.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (long idx = 0; idx < nv; ++idx) {
      const std::size_t i = idx / (kDeg + 1), j = idx % (kDeg + 1);
      const double c = -tau_max_ + (2.0 * i + 1.0) * lv.half;
      vals[idx] = g(c + lv.half * in.s[j]);
    }
    for (std::size_t i = 0; i < lv.panels; ++i)
      for (std::size_t e = 0; e < ne; ++e) {
        Eigen::Matrix<cplx, kDeg + 1, 1> vp, vm;
        for (int j = 0; j <= kDeg; ++j) {
          vp(j) = vals[i * (kDeg + 1) + j].first[e];
          vm(j) = vals[i * (kDeg + 1) + j].second[e];
        }
        const Eigen::Matrix<cplx, kDeg + 1, 1> ap = in.vinv.cast<cplx>() * vp, am = in.vinv.cast<cplx>() * vm;
        for (int m = 0; m <= kDeg; ++m) {
          lv.plus[e][i][m] = ap(m);
          lv.minus[e][i][m] = am(m);
        }
      }
    levels_.emplace(L, std::move(lv));
  }
}

const DispersiveKernel::Level& DispersiveKernel::level(int L) const {
  auto it = levels_.find(L);
  if (it == levels_.end()) throw GraphError("dispersive kernel not prepared for this time");
  return it->second;
}

cplx DispersiveKernel::value(double t, const SamplePoint& s) const {
  const Edge& edge = tree_.edge(s.edge);
  if (s.x < 0.0 || s.x > edge.length) throw GraphError("sample point outside its edge");
  cplx u = 0.0;
  for (const Packet& p : packets_.on_edge(edge.id)) u += free_packet(p, t, s.x);
  if (packets_.empty()) return u;

  const Level& lv = level(level_for(t));
  const double h = lv.half;
  const double A = -t * h * h;
  cplx integral = 0.0;
  for (std::size_t i = 0; i < lv.panels; ++i) {
    const double c = -tau_max_ + (2.0 * i + 1.0) * h;
    for (int sg : {1, -1}) {
      const auto& a = sg > 0 ? lv.plus[s.edge][i] : lv.minus[s.edge][i];
      const double B = h * (sg * s.x - 2.0 * t * c);
      const auto J = oscillatory_moments(A, B);
      cplx acc = 0.0;
      for (int m = 0; m <= kDeg; ++m) acc += a[m] * J[m];
      integral += h * std::exp(I * (-t * c * c + sg * s.x * c)) * acc;
    }
  }
  return u + integral / std::numbers::pi;
}

namespace {

EvolutionResult run(const EvolutionRequest& req, bool parallel) {
  DispersiveKernel k(req.tree, req.u0.packets, req.quad);
  k.prepare(req.times);
  EvolutionResult res;
  res.times = req.times;
  res.samples = req.samples;
  res.tau_max = k.tau_max();
  res.rho = k.rho();
  res.base_panels = k.base_panels();
  const std::size_t nt = req.times.size(), ns = req.samples.size();
  res.values.assign(nt, std::vector<cplx>(ns));
  const long n = static_cast<long>(nt * ns);
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (long idx = 0; idx < n; ++idx)
      res.values[idx / ns][idx % ns] = k.value(req.times[idx / ns], req.samples[idx % ns]);
  } else {
    for (long idx = 0; idx < n; ++idx)
      res.values[idx / ns][idx % ns] = k.value(req.times[idx / ns], req.samples[idx % ns]);
  }
  return res;
}

} // namespace

EvolutionResult evolve_dispersive(const EvolutionRequest& req) { return run(req, true); }

EvolutionResult evolve_dispersive_serial(const EvolutionRequest& req) { return run(req, false); }

EvolutionResult evolve_full(const EvolutionRequest& req, const SpectralData& spec) {
  EvolutionResult res = evolve_dispersive(req);
  if (!req.include_bound_part) return res;
  for (const Eigenfunction& phi : spec.eigenfunctions) {
    const cplx w = inner(req.tree, req.u0, phi);
    for (std::size_t it = 0; it < res.times.size(); ++it) {
      const cplx ph = std::exp(I * res.times[it] * phi.omega * phi.omega);
      for (std::size_t is = 0; is < res.samples.size(); ++is)
        res.values[it][is] += ph * w * phi(res.samples[is].edge, res.samples[is].x);
    }
  }
  return res;
}

double self_consistency(const EvolutionRequest& req) {
  const EvolutionResult a = evolve_dispersive(req);
  EvolutionRequest fine = req;
  fine.quad.panel_scale *= 2.0;
  fine.quad.tau_max = 1.5 * a.tau_max;
  const EvolutionResult b = evolve_dispersive(fine);
  double worst = 0.0;
  for (std::size_t it = 0; it < a.times.size(); ++it) {
    double scale = 0.0;
    for (const cplx& v : b.values[it]) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) continue;
    for (std::size_t is = 0; is < a.samples.size(); ++is)
      worst = std::max(worst, std::abs(a.values[it][is] - b.values[it][is]) / scale);
  }
  return worst;
}

DecayReport decay_scan(const MetricTree& tree, const GraphFunction& u0, const std::vector<double>& times,
                       int points_per_edge, const TauQuadrature& quad) {
  DispersiveKernel k(tree, u0, quad);
  k.prepare(times);
  DecayReport rep;
  rep.times = times;
  rep.l1_norm = lp_norm(tree, u0, 1.0);

  double total = 0.0;
  for (std::size_t e : tree.internal_edges()) total += tree.edge(e).length;

  for (double t : times) {
    // Everything above the tail threshold travels inside this cone.
    double W = 1.0, width = kInf;
    for (const auto& [id, ps] : u0.packets())
      for (const Packet& p : ps) {
        const double st = p.sigma * std::sqrt(1.0 + 4.0 * t * t / std::pow(p.sigma, 4));
        W = std::max(W, total + p.x0 + 2.0 * std::abs(p.k) * t + 6.0 * st);
        width = std::min(width, st);
      }
    // |u| varies on the scale of the spread packet width; 16 points per width.
    std::vector<SamplePoint> pts;
    std::vector<double> step;
    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
      const double len = tree.edge(e).infinite() ? W : tree.edge(e).length;
      const int n = std::max(points_per_edge, static_cast<int>(std::ceil(16.0 * len / width)));
      for (int i = 0; i < n; ++i) {
        pts.push_back(SamplePoint{e, len * i / (n - 1)});
        step.push_back(len / (n - 1));
      }
    }
    std::vector<double> mag(pts.size());
    const long np = static_cast<long>(pts.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long i = 0; i < np; ++i) mag[i] = std::abs(k.value(t, pts[i]));
    const std::size_t best = std::max_element(mag.begin(), mag.end()) - mag.begin();
    const SamplePoint at = pts[best];
    const double len = tree.edge(at.edge).infinite() ? W : tree.edge(at.edge).length;
    const auto [xm, neg] = boost::math::tools::brent_find_minima(
        [&](double x) { return -std::abs(k.value(t, SamplePoint{at.edge, x})); }, std::max(0.0, at.x - step[best]),
        std::min(len, at.x + step[best]), 40);
    const double sup = std::max(mag[best], -neg);
    rep.sup.push_back(sup);
    rep.sqrt_t_sup.push_back(std::sqrt(std::abs(t)) * sup);
    rep.window.push_back(W);
  }

  std::vector<double> X, Y;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] >= 1.0 && rep.sup[i] > 0.0) {
      X.push_back(std::log(times[i]));
      Y.push_back(std::log(rep.sup[i]));
    }
  if (X.size() >= 2) {
    const double n = static_cast<double>(X.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      sx += X[i];
      sy += Y[i];
      sxx += X[i] * X[i];
      sxy += X[i] * Y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    rep.beta = -slope;
    rep.C = std::exp(icpt);
    double r2 = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) r2 += std::pow(Y[i] - icpt - slope * X[i], 2);
    rep.fit_residual = std::sqrt(r2 / n);
  }
  return rep;
}

void write_samples_csv(std::ostream& os, const MetricTree& tree, const EvolutionResult& res) {
  os.precision(12);
  os << "t,edge,x,re,im,abs\n";
  for (std::size_t it = 0; it < res.times.size(); ++it)
    for (std::size_t is = 0; is < res.samples.size(); ++is) {
      const cplx v = res.values[it][is];
      os << res.times[it] << ',' << tree.edge(res.samples[is].edge).id << ',' << res.samples[is].x << ','
         << v.real() << ',' << v.imag() << ',' << std::abs(v) << '\n';
    }
}

} // namespace qgraph
