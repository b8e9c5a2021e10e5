// Copyright 2026 The xeblab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "xeblab/drmodel.hpp"

// Spectral gaps of the two-layer transfer operator of an open 1D brickwork
// strip. Everything stays in the particle (I / Omega) basis; the Ising spin
// basis differs by a per-site similarity transform, so spectra agree.
namespace xeblab::ising {

enum class FieldKind { Ideal, BulkNoise, BoundaryOmission };
enum class Side { Left, Right };

struct FieldConfig {
  FieldKind kind = FieldKind::Ideal;
  double eps = 0;                // bulk noise rate
  double c = 4.0 / 3.0;          // noise coefficient, Omega entry 1 - c eps
  Side side = Side::Right;       // boundary omission side

  static FieldConfig ideal() { return {}; }
  static FieldConfig bulk_noise(double eps, double c = 4.0 / 3.0) {
    return {FieldKind::BulkNoise, eps, c, Side::Right};
  }
  static FieldConfig boundary_omission(Side s = Side::Right) {
    return {FieldKind::BoundaryOmission, 0, 4.0 / 3.0, s};
  }

  std::string tag() const {
    std::ostringstream o;
    switch (kind) {
      case FieldKind::Ideal: o << "ideal"; break;
      case FieldKind::BulkNoise: o << "bulk-noise(" << eps << "," << c << ")"; break;
      case FieldKind::BoundaryOmission:
        o << "boundary-omission(" << (side == Side::Left ? "left" : "right") << ")";
        break;
    }
    return o.str();
  }
};

inline constexpr int kPeriodCap = 16;
inline constexpr int kDensePeriodCap = 12;

// (odd layer) * (even layer) with site factors folded in. Even layers hold
// pairs (0,1), (2,3), ...; odd layers (1,2), (3,4), ...
struct PeriodOperator {
  int width = 0;
  dr::TransferMatrix4 t;
  std::vector<double> factors[2];  // Omega entry per site, per layer parity
  FieldConfig config;

  std::size_t dim() const { return std::size_t{1} << width; }

  void apply_layer(std::vector<double>& w, int parity) const {
    for (int a = parity; a + 1 < width; a += 2) dr::kernel::apply_pair(w, a, a + 1, t);
    for (int q = 0; q < width; ++q) dr::kernel::apply_site(w, q, factors[parity][q]);
  }

  void apply(std::vector<double>& w) const {
    apply_layer(w, 0);
    apply_layer(w, 1);
  }

  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
    std::vector<double> w(in.data(), in.data() + in.size());
    apply(w);
    out = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<long>(w.size()));
  }

  Eigen::MatrixXd dense() const {
    if (width > kDensePeriodCap)
      throw ResourceError("dense period operator above width " +
                          std::to_string(kDensePeriodCap));
    Eigen::MatrixXd m(dim(), dim());
    for (std::size_t c = 0; c < dim(); ++c) {
      std::vector<double> w(dim(), 0.0);
      w[c] = 1;
      apply(w);
      for (std::size_t r = 0; r < dim(); ++r) m(static_cast<long>(r), static_cast<long>(c)) = w[r];
    }
    return m;
  }
};

inline PeriodOperator build_period_operator(int l, const dr::DRParams& params,
                                            const FieldConfig& config) {
  if (l < 2) throw std::invalid_argument("period operator needs width >= 2");
  if (l > kPeriodCap)
    throw ResourceError("period operator width " + std::to_string(l) +
                        " exceeds cap " + std::to_string(kPeriodCap));
  PeriodOperator op{l, dr::build_T(params), {}, config};
  for (auto& f : op.factors) f.assign(l, 1.0);
  switch (config.kind) {
    case FieldKind::Ideal: break;
    case FieldKind::BulkNoise:
      if (config.eps < 0 || config.eps > 1)
        throw std::invalid_argument("noise rate outside [0, 1]");
      for (auto& f : op.factors)
        for (double& x : f) x = 1.0 - config.c * config.eps;
      break;
    case FieldKind::BoundaryOmission:
      // The omitted gate couples the boundary site to its outside neighbour,
      // which happens in the layers where that site has no partner inside.
      if (config.side == Side::Right)
        op.factors[(l - 1) % 2][l - 1] = 0.0;
      else
        op.factors[1][0] = 0.0;
      break;
  }
  return op;
}

// ---------------------------------------------------------------------------
// Eigenvalues

struct GapResult {
  double lambda0 = 0, lambda1 = 0;
  double delta = 0;  // (1/2) ln(lambda0 / lambda1), per layer
  int width = 0;
  std::string config;
  double residual0 = 0, residual1 = 0;
  int iterations = 0;
  double prefactor = 0;  // C of C e^{-delta d}, see fit_prefactor
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Any operator with dim() and apply(const VectorXd&, VectorXd&).
struct DenseOperator {
  Eigen::MatrixXd m;
  std::size_t dim() const { return static_cast<std::size_t>(m.rows()); }
  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const { out = m * in; }
};

struct EigOptions {
  int block = 6;
  int max_iterations = 20000;
  double tol = 1e-10;  // relative residual of the two leading Ritz pairs
};

// Subspace iteration with Rayleigh-Ritz; returns the two largest eigenvalue
// magnitudes. The block starts from the all-ones vector, the vacuum, and
// deterministic pseudo-random vectors.
template <typename Op>
GapResult top_two_eigs(const Op& op, const EigOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const long n = static_cast<long>(op.dim());
  const long b = std::min<long>(opt.block, n);
  MatrixXd v(n, b);
  auto g = stream(0x1517, static_cast<std::uint64_t>(n));
  for (long j = 0; j < b; ++j)
    for (long i = 0; i < n; ++i) v(i, j) = uniform01(g) + 0.5;
  v.col(0).setOnes();
  if (b > 1) {
    v.col(1).setZero();
    v(0, 1) = 1;
  }

  auto orthonormalize = [&](MatrixXd& m) {
    Eigen::HouseholderQR<MatrixXd> qr(m);
    m = qr.householderQ() * MatrixXd::Identity(m.rows(), m.cols());
  };
  orthonormalize(v);

  MatrixXd av(n, b);
  VectorXd col(n);
  auto multiply = [&]() {
    for (long j = 0; j < b; ++j) {
      op.apply(v.col(j), col);
      av.col(j) = col;
    }
  };

  GapResult res;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    multiply();
    const MatrixXd h = v.transpose() * av;
    Eigen::EigenSolver<MatrixXd> es(h);
    const Eigen::VectorXcd vals = es.eigenvalues();
    std::vector<long> order(b);
    for (long j = 0; j < b; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](long x, long y) {
      return std::abs(vals[x]) > std::abs(vals[y]);
    });
    double resid[2] = {0, 0};
    for (int k = 0; k < std::min<long>(2, b); ++k) {
      const Eigen::VectorXcd y = es.eigenvectors().col(order[k]);
      const Eigen::VectorXcd x = v.cast<std::complex<double>>() * y;
      const Eigen::VectorXcd ax = av.cast<std::complex<double>>() * y;
      const double scale = std::max(std::abs(vals[order[k]]), 1e-300) * x.norm();
      resid[k] = (ax - vals[order[k]] * x).norm() / scale;
    }
    res.lambda0 = std::abs(vals[order[0]]);
    res.lambda1 = b > 1 ? std::abs(vals[order[1]]) : 0.0;
    res.residual0 = resid[0];
    res.residual1 = resid[1];
    res.iterations = it;
    if (resid[0] < opt.tol && resid[1] < opt.tol) break;
    if (it == opt.max_iterations) {
      std::ostringstream o;
      o << "top_two_eigs did not converge in " << it
        << " iterations; residuals " << resid[0] << ", " << resid[1];
      throw ConvergenceError(o.str());
    }
    v = av;
    orthonormalize(v);
  }
  res.delta = res.lambda1 > 0 ? 0.5 * std::log(res.lambda0 / res.lambda1)
                              : std::numeric_limits<double>::infinity();
  return res;
}

inline GapResult gap(int l, const dr::DRParams& params, const FieldConfig& config,
                     const EigOptions& opt = {}) {
  const PeriodOperator op = build_period_operator(l, params, config);
  GapResult r = top_two_eigs(op, opt);
  r.width = l;
  r.config = config.tag();
  return r;
}

// ---------------------------------------------------------------------------
// Decay prediction

// Exact chi of a single strip after d layers, starting from the layer-0
// parity.
inline double strip_xeb(int l, const dr::DRParams& params,
                        const FieldConfig& config, int d) {
  const PeriodOperator op = build_period_operator(l, params, config);
  dr::ParticleDistribution p = dr::initial_distribution(l);
  for (int t = 0; t < d; ++t) op.apply_layer(p.weights, t % 2);
  return dr::evaluate_xeb(p);
}

// C from two depth anchors: geometric mean of chi(d) e^{delta d}.
inline void fit_prefactor(GapResult& g, const dr::DRParams& params,
                          const FieldConfig& config, int d1, int d2) {
  const double c1 = strip_xeb(g.width, params, config, d1);
  const double c2 = strip_xeb(g.width, params, config, d2);
  g.prefactor = std::sqrt(c1 * std::exp(g.delta * d1) * c2 * std::exp(g.delta * d2));
}

// m C e^{-delta d}; only the exponent comes from the spectral analysis.
inline double predict_xeb_decay(const GapResult& g, int d, int multiplicity) {
  return multiplicity * g.prefactor * std::exp(-g.delta * d);
}

// ---------------------------------------------------------------------------
// Sweeps

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

// Least-squares polynomial coefficients, lowest order first.
inline std::vector<double> polyfit(const std::vector<double>& x,
                                   const std::vector<double>& y, int degree) {
  if (degree < 0 || static_cast<int>(x.size()) <= degree)
    throw std::invalid_argument("polyfit needs more points than the degree");
  Eigen::MatrixXd a(x.size(), degree + 1);
  Eigen::VectorXd rhs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = 1;
    for (int k = 0; k <= degree; ++k, p *= x[i]) a(static_cast<long>(i), k) = p;
    rhs(static_cast<long>(i)) = y[i];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(rhs);
  return {c.data(), c.data() + c.size()};
}

inline std::vector<GapResult> boundary_gap_sweep(const dr::DRParams& params,
                                                 const std::vector<int>& widths,
                                                 Side side = Side::Right) {
  std::vector<GapResult> out(widths.size());
  parallel_for(widths.size(), [&](std::size_t i) {
    out[i] = gap(widths[i], params, FieldConfig::boundary_omission(side));
  });
  return out;
}

struct NoiseGapSweep {
  std::vector<double> eps;
  std::vector<int> widths;
  std::vector<std::vector<GapResult>> grid;  // grid[e][n]
  std::vector<double> saturated;             // per eps, NaN if not saturated
  std::vector<int> saturated_at;             // width where saturation held
  std::vector<double> extrapolation;         // polynomial coefficients
  double delta3 = std::numeric_limits<double>::quiet_NaN();
};

// Delta_{N,eps} over the grid, the saturated value per eps (largest width
// once successive differences drop below sat_tol) and its polynomial
// extrapolation to eps = 0.
inline NoiseGapSweep noise_gap_sweep(const dr::DRParams& params,
                                     const std::vector<int>& widths,
                                     const std::vector<double>& eps,
                                     double c = 4.0 / 3.0, int degree = 3,
                                     double sat_tol = 1e-4) {
  NoiseGapSweep s{eps, widths, {}, {}, {}, {}, std::numeric_limits<double>::quiet_NaN()};
  s.grid.assign(eps.size(), std::vector<GapResult>(widths.size()));
  const std::size_t cells = eps.size() * widths.size();
  parallel_for(cells, [&](std::size_t k) {
    const std::size_t e = k / widths.size(), w = k % widths.size();
    s.grid[e][w] = gap(widths[w], params, FieldConfig::bulk_noise(eps[e], c));
  });
  std::vector<double> xs, ys;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    double sat = std::numeric_limits<double>::quiet_NaN();
    int at = -1;
    for (std::size_t w = 1; w < widths.size(); ++w)
      if (std::abs(s.grid[e][w].delta - s.grid[e][w - 1].delta) < sat_tol) {
        sat = s.grid[e].back().delta;
        at = widths[w];
        break;
      }
    s.saturated.push_back(sat);
    s.saturated_at.push_back(at);
    if (!std::isnan(sat)) {
      xs.push_back(eps[e]);
      ys.push_back(sat);
    }
  }
  const int deg = std::min<int>(degree, static_cast<int>(xs.size()) - 1);
  if (deg >= 0) {
    s.extrapolation = polyfit(xs, ys, deg);
    s.delta3 = s.extrapolation[0];
  }
  return s;
}

inline void write_gap_csv(std::ostream& out, const std::vector<GapResult>& rows,
                          const std::vector<double>& eps = {}) {
  out << "l,eps,config,lambda0,lambda1,delta\n";
  out.precision(12);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << rows[i].width << ',' << (i < eps.size() ? eps[i] : 0.0) << ",\""
        << rows[i].config << "\"," << rows[i].lambda0 << ',' << rows[i].lambda1
        << ',' << rows[i].delta << '\n';
}

}  // namespace xeblab::ising
