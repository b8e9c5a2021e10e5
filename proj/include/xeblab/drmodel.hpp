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
#include <array>
#include <optional>
#include <ostream>
#include <vector>

#include "xeblab/circuits.hpp"
#include "xeblab/metrics.hpp"
#include "xeblab/partition.hpp"
#include "xeblab/simulator.hpp"

namespace xeblab::dr {

// Site state I = 0 (vacuum), Omega = 1 (particle). Pair index 2*s_a + s_b,
// i.e. the basis order (II, I Omega, Omega I, Omega Omega).
inline constexpr int kII = 0, kIO = 1, kOI = 2, kOO = 3;
inline constexpr double kEta = 3.0;

using TransferMatrix4 = Eigen::Matrix4d;  // T(to, from)

struct DRParams {
  double D = 0;
  double R = 0;
  double eta = kEta;
};

// ---------------------------------------------------------------------------
// Gate -> transfer matrix

namespace detail {

inline const std::array<Mat4, 16>& two_qubit_paulis() {
  static const std::array<Mat4, 16> ps = [] {
    std::array<Mat4, 16> out;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out[4 * i + j] = kron(pauli(i), pauli(j));
    return out;
  }();
  return ps;
}

inline int pauli_class(int k) { return 2 * (k / 4 != 0) + (k % 4 != 0); }

}  // namespace detail

// T0(s1 s2, s3 s4): sum over Pauli strings P in class (s1 s2), Q in class
// (s3 s4) of [Tr(P G Q G^dag) / 4]^2.
inline TransferMatrix4 transfer_T0(const Mat4& g) {
  const auto& ps = detail::two_qubit_paulis();
  TransferMatrix4 t0 = TransferMatrix4::Zero();
  const Mat4 gd = g.adjoint();
  for (int q = 0; q < 16; ++q) {
    const Mat4 m = g * ps[q] * gd;
    for (int p = 0; p < 16; ++p) {
      const double c = (ps[p] * m).trace().real() / 4.0;
      t0(detail::pauli_class(p), detail::pauli_class(q)) += c * c;
    }
  }
  return t0;
}

// T = T0 (W (x) W), W = diag(1, 1/3): the single-qubit Haar average inserted
// before the gate weighs each Omega input by 1/3.
inline TransferMatrix4 apply_input_weights(TransferMatrix4 t0) {
  for (int c = 0; c < 4; ++c) {
    const int k = (c >> 1) + (c & 1);
    t0.col(c) /= std::pow(3.0, k);
  }
  return t0;
}

inline TransferMatrix4 transfer_matrix(const Mat4& g) {
  return apply_input_weights(transfer_T0(g));
}

inline DRParams params_of(const TransferMatrix4& t) {
  return {1.0 - t(kIO, kIO), t(kOO, kIO), kEta};
}

inline void check_transfer(const TransferMatrix4& t, double col_tol = 1e-12,
                           double eta_tol = 1e-9) {
  for (int c = 0; c < 4; ++c)
    if (std::abs(t.col(c).sum() - 1.0) > col_tol)
      throw std::logic_error("transfer matrix column " + std::to_string(c) +
                             " does not sum to 1");
  if (std::abs(kEta * t(kIO, kOO) - t(kOO, kIO)) > eta_tol)
    throw std::logic_error("transfer matrix violates eta = 3");
  if (t.minCoeff() < -1e-12)
    throw std::logic_error("transfer matrix has a negative entry");
}

inline DRParams extract_DR(const Mat4& g) {
  if (!is_unitary(g, 1e-10))
    throw std::invalid_argument("extract_DR: gate is not unitary");
  const TransferMatrix4 t = transfer_matrix(g);
  check_transfer(t);
  return params_of(t);
}

inline TransferMatrix4 build_T(const DRParams& p) {
  const double D = p.D, R = p.R, e = p.eta;
  TransferMatrix4 t;
  t << 1, 0, 0, 0,
       0, 1 - D, D - R, R / e,
       0, D - R, 1 - D, R / e,
       0, R, R, 1 - 2 * R / e;
  return t;
}

struct EnsembleDR {
  DRParams params;
  // Monte Carlo cross-check (Haar2 only): estimates and standard errors.
  std::optional<DRParams> mc;
  double mc_D_se = 0, mc_R_se = 0;
};

inline EnsembleDR dr_for_ensemble(const GateEnsemble& ens,
                                  std::size_t mc_samples = 0,
                                  std::uint64_t seed = 0) {
  EnsembleDR out;
  if (ens.kind != EnsembleKind::Haar2) {
    out.params = extract_DR(ens.entangler());
    return out;
  }
  out.params = {0.8, 0.6, kEta};
  if (mc_samples == 0) return out;
  std::vector<double> ds(mc_samples), rs(mc_samples);
  for (std::size_t i = 0; i < mc_samples; ++i) {
    auto g = stream(seed, 0xd2, i);
    const DRParams p = extract_DR(haar_unitary<4>(g));
    ds[i] = p.D;
    rs[i] = p.R;
  }
  const EnsembleStat sd = ensemble_average(ds), sr = ensemble_average(rs);
  out.mc = DRParams{sd.mean, sr.mean, kEta};
  out.mc_D_se = sd.standard_error;
  out.mc_R_se = sr.standard_error;
  return out;
}

// ---------------------------------------------------------------------------
// Defects

// Omega-diagonal entry of the site factor diag(1, f) per (layer, qubit),
// applied after that layer's gates.
struct DefectMap {
  int depth = 0;
  int n_qubits = 0;
  std::vector<double> omega;

  static DefectMap identity(int depth, int n) {
    return {depth, n, std::vector<double>(static_cast<std::size_t>(depth) * n, 1.0)};
  }
  double at(int t, int q) const { return omega[static_cast<std::size_t>(t) * n_qubits + q]; }
  double& at(int t, int q) { return omega[static_cast<std::size_t>(t) * n_qubits + q]; }
};

// c = 4/3 for depolarizing (exact); c = 2/3 for amplitude damping (first
// order in eps).
inline double noise_coefficient(NoiseKind k) {
  return k == NoiseKind::Depolarizing ? 4.0 / 3.0 : 2.0 / 3.0;
}

inline DefectMap attach_defects(const Architecture& arch,
                                const std::optional<NoiseModel>& noise,
                                const Partition* part) {
  DefectMap m = DefectMap::identity(arch.depth(), arch.n_qubits);
  if (noise) {
    noise->validate();
    const double f = 1.0 - noise_coefficient(noise->kind) * noise->rate;
    for (double& x : m.omega) x *= f;
  }
  if (part)
    for (const CutGate& c : part->cut_gates) {
      const auto [a, b] = arch.layers[c.layer][c.pair];
      m.at(c.layer, a) = 0;
      m.at(c.layer, b) = 0;
    }
  return m;
}

// ---------------------------------------------------------------------------
// Exact propagation

struct ParticleDistribution {
  int n_sites = 0;
  std::vector<double> weights;  // bit q set = particle on site q
};

inline constexpr int kDenseCap = 26;

namespace kernel {

inline void apply_pair(std::vector<double>& w, int a, int b,
                       const TransferMatrix4& t) {
  const std::size_t sa = std::size_t{1} << a, sb = std::size_t{1} << b;
  const std::size_t mask = sa | sb, n = w.size();
  double m[16];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m[4 * r + c] = t(r, c);
  for (std::size_t i = 0; i < n; ++i) {
    if (i & mask) continue;
    const std::size_t idx[4] = {i, i | sb, i | sa, i | sa | sb};
    const double x[4] = {w[idx[0]], w[idx[1]], w[idx[2]], w[idx[3]]};
    for (int r = 0; r < 4; ++r)
      w[idx[r]] = m[4 * r] * x[0] + m[4 * r + 1] * x[1] + m[4 * r + 2] * x[2] +
                  m[4 * r + 3] * x[3];
  }
}

inline void apply_site(std::vector<double>& w, int q, double f) {
  if (f == 1.0) return;
  const std::size_t s = std::size_t{1} << q, n = w.size();
  for (std::size_t hi = 0; hi < n; hi += 2 * s)
    for (std::size_t i = hi + s; i < hi + 2 * s; ++i) w[i] *= f;
}

}  // namespace kernel

inline ParticleDistribution initial_distribution(int n) {
  const std::size_t dim = std::size_t{1} << n;
  return {n, std::vector<double>(dim, 1.0 / static_cast<double>(dim))};
}

inline void apply_layer(ParticleDistribution& p, const Layer& layer,
                        const TransferMatrix4& t, const DefectMap& defects,
                        int layer_index) {
  for (auto [a, b] : layer) kernel::apply_pair(p.weights, a, b, t);
  for (int q = 0; q < p.n_sites; ++q)
    kernel::apply_site(p.weights, q, defects.at(layer_index, q));
}

inline ParticleDistribution propagate_exact(const Architecture& arch,
                                            const TransferMatrix4& t,
                                            const DefectMap& defects,
                                            int cap = kDenseCap) {
  if (arch.n_qubits > cap)
    throw ResourceError("dense propagation over " +
                        std::to_string(arch.n_qubits) + " sites exceeds cap " +
                        std::to_string(cap));
  ParticleDistribution p = initial_distribution(arch.n_qubits);
  for (int l = 0; l < arch.depth(); ++l)
    apply_layer(p, arch.layers[l], t, defects, l);
  return p;
}

inline ParticleDistribution propagate_exact(const Architecture& arch,
                                            const DRParams& params,
                                            const DefectMap& defects,
                                            int cap = kDenseCap) {
  return propagate_exact(arch, build_T(params), defects, cap);
}

// 2^N sum_config w / 3^{#Omega} - 1, i.e. the v_XEB = (2, 2/3) contraction.
// The vacuum term is kept apart so tiny values of chi survive the - 1.
inline double evaluate_xeb(const ParticleDistribution& p) {
  std::vector<double> t(p.weights.size());
  const double scale = std::ldexp(1.0, p.n_sites);
  static const std::array<double, 65> inv3 = [] {
    std::array<double, 65> a{};
    a[0] = 1;
    for (int k = 1; k < 65; ++k) a[k] = a[k - 1] / 3.0;
    return a;
  }();
  for (std::size_t i = 1; i < t.size(); ++i)
    t[i] = p.weights[i] * inv3[popcount(i)];
  return scale * pairwise_sum(t) + (scale * p.weights[0] - 1.0);
}

inline double evaluate_fidelity(const ParticleDistribution& p) {
  return pairwise_sum(p.weights);
}

enum class Observable { XEB, Fidelity };

inline double evaluate(const ParticleDistribution& p, Observable which) {
  return which == Observable::XEB ? evaluate_xeb(p) : evaluate_fidelity(p);
}

// Marginal weight of configurations with k particles, k = 0..N.
inline std::vector<double> particle_count_marginal(
    const ParticleDistribution& p) {
  std::vector<double> m(p.n_sites + 1, 0.0);
  for (std::size_t i = 0; i < p.weights.size(); ++i)
    m[popcount(i)] += p.weights[i];
  return m;
}

// ---------------------------------------------------------------------------
// Factorized propagation

struct FactorizedDistribution {
  std::vector<std::vector<int>> subsystems;
  std::vector<ParticleDistribution> parts;
};

// Each subsystem evolves alone; every gate that straddles two subsystems
// must carry P_I on both sites at its layer.
inline FactorizedDistribution propagate_factorized(
    const Architecture& arch, const TransferMatrix4& t,
    const DefectMap& defects, const std::vector<std::vector<int>>& subsystems,
    int cap = kDenseCap) {
  xeblab::detail::check_cover(arch.n_qubits, subsystems);
  std::vector<int> owner(arch.n_qubits), local(arch.n_qubits);
  for (std::size_t s = 0; s < subsystems.size(); ++s)
    for (std::size_t j = 0; j < subsystems[s].size(); ++j) {
      owner[subsystems[s][j]] = static_cast<int>(s);
      local[subsystems[s][j]] = static_cast<int>(j);
    }
  for (int l = 0; l < arch.depth(); ++l)
    for (auto [a, b] : arch.layers[l])
      if (owner[a] != owner[b] &&
          (defects.at(l, a) != 0.0 || defects.at(l, b) != 0.0))
        throw std::invalid_argument(
            "factorized propagation needs P_I on every cross-subsystem gate "
            "(layer " + std::to_string(l) + ")");

  FactorizedDistribution out{subsystems, {}};
  for (std::size_t s = 0; s < subsystems.size(); ++s) {
    const auto& qs = subsystems[s];
    const int n = static_cast<int>(qs.size());
    if (n > cap)
      throw ResourceError("subsystem of " + std::to_string(n) +
                          " sites exceeds dense cap");
    Architecture sub{n, {}, ArchKind::Custom, Boundary::Open};
    DefectMap sd = DefectMap::identity(arch.depth(), n);
    for (int l = 0; l < arch.depth(); ++l) {
      Layer layer;
      for (auto [a, b] : arch.layers[l])
        if (owner[a] == static_cast<int>(s) && owner[b] == static_cast<int>(s))
          layer.emplace_back(local[a], local[b]);
      sub.layers.push_back(std::move(layer));
      for (int j = 0; j < n; ++j) sd.at(l, j) = defects.at(l, qs[j]);
    }
    out.parts.push_back(propagate_exact(sub, t, sd, cap));
  }
  return out;
}

inline double evaluate(const FactorizedDistribution& f, Observable which) {
  double prod = 1.0;
  for (const auto& p : f.parts)
    prod *= which == Observable::XEB ? 1.0 + evaluate_xeb(p)
                                     : evaluate_fidelity(p);
  return which == Observable::XEB ? prod - 1.0 : prod;
}

// ---------------------------------------------------------------------------
// Chain contraction

inline constexpr int kChainDepthCap = 22;

struct ChainResult {
  double xeb = 0, fidelity = 0;
};

// Exact chi and F of an open nearest-neighbour chain, contracted along space.
// The state is indexed by the depth + 1 worldline segments of one qubit plus a
// flag for histories that have left the vacuum, so the cost is linear in N
// and exponential only in the depth.
inline ChainResult contract_chain(const Architecture& arch, const TransferMatrix4& t,
                                  const DefectMap& defects, int depth_cap = kChainDepthCap) {
  const int n = arch.n_qubits, d = arch.depth();
  if (d > depth_cap)
    throw ResourceError("chain contraction at depth " + std::to_string(d) +
                        " exceeds cap " + std::to_string(depth_cap));
  // links[j]: layers holding the gate on (j, j + 1), and whether j is
  // the first qubit of that pair.
  std::vector<std::vector<std::pair<int, bool>>> links(n);
  std::vector<std::vector<char>> busy(n, std::vector<char>(d, 0));
  for (int l = 0; l < d; ++l)
    for (auto [a, b] : arch.layers[l]) {
      if (std::abs(a - b) != 1)
        throw UnsupportedError("chain contraction needs an open nearest-neighbour chain");
      links[std::min(a, b)].emplace_back(l, a < b);
      busy[a][l] = busy[b][l] = 1;
    }
  for (const auto& v : links)
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i].first == v[i - 1].first + 1)
        throw UnsupportedError("chain contraction needs the same pair at least two layers apart");

  const int bits = d + 1;
  const std::size_t dim = std::size_t{1} << bits;
  auto run = [&](double final_i, double final_o, bool drop_vacuum) {
    // v[flag * dim + s]
    std::vector<double> v(2 * dim, 1.0);
    std::fill(v.begin() + dim, v.end(), 0.0);
    auto local = [&](int j) {
      for (std::size_t s = 0; s < dim; ++s) {
        double f = 0.5 * ((s >> d) & 1 ? final_o : final_i);
        for (int l = 0; l < d && f != 0; ++l) {
          const bool in = (s >> l) & 1, out = (s >> (l + 1)) & 1;
          if (!busy[j][l] && in != out) f = 0;
          else if (out) f *= defects.at(l, j);
        }
        v[s] *= f;
        v[dim + s] *= f;
      }
    };
    auto mark = [&] {
      for (std::size_t s = 1; s < dim; ++s) {
        v[dim + s] += v[s];
        v[s] = 0;
      }
    };
    for (int j = 0;; ++j) {
      if (j == 0) mark();
      local(j);
      if (j == n - 1) break;
      std::vector<char> covered(bits, 0);
      for (auto [l, j_first] : links[j]) {
        covered[l] = covered[l + 1] = 1;
        // m[(b_l, b_l+1)][(a_l, a_l+1)] with a on qubit j and b on j + 1.
        double m[4][4];
        for (int ai = 0; ai < 2; ++ai)
          for (int ao = 0; ao < 2; ++ao)
            for (int bi = 0; bi < 2; ++bi)
              for (int bo = 0; bo < 2; ++bo)
                m[2 * bi + bo][2 * ai + ao] =
                    j_first ? t(2 * ao + bo, 2 * ai + bi) : t(2 * bo + ao, 2 * bi + ai);
        const std::size_t lo = std::size_t{1} << l, hi = lo << 1;
        for (std::size_t i = 0; i < 2 * dim; ++i) {
          if (i & (lo | hi)) continue;
          const std::size_t idx[4] = {i, i | hi, i | lo, i | lo | hi};
          const double x[4] = {v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]};
          for (int r = 0; r < 4; ++r)
            v[idx[r]] = m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2] + m[r][3] * x[3];
        }
      }
      for (int k = 0; k < bits; ++k) {
        if (covered[k]) continue;
        const std::size_t b = std::size_t{1} << k;
        for (std::size_t i = 0; i < 2 * dim; ++i)
          if (!(i & b)) v[i] = v[i | b] = v[i] + v[i | b];
      }
      mark();
    }
    return drop_vacuum ? pairwise_sum(std::span<const double>(v).subspan(dim))
                       : pairwise_sum(v);
  };
  return {run(2.0, 2.0 / 3.0, true), run(1.0, 1.0, false)};
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MCResult {
  double xeb = 0, xeb_se = 0;
  double fidelity = 0, fidelity_se = 0;
  std::size_t n_samples = 0;
};

// Trajectories of the stochastic process. Each carries a weight multiplied by
// the site factor of every occupied site after each layer, so F and chi come
// from the same samples. The vacuum never moves and keeps weight 2^-N, so its
// share is added analytically and trajectories start from non-vacuum states.
inline MCResult propagate_mc(const Architecture& arch, const TransferMatrix4& t,
                             const DefectMap& defects, std::size_t n_samples,
                             std::uint64_t seed) {
  if (arch.n_qubits > 64)
    throw ResourceError("Monte Carlo configurations are limited to 64 sites");
  if (n_samples < 2) throw std::invalid_argument("need at least 2 samples");
  // Cumulative column distributions.
  std::array<std::array<double, 4>, 4> cum{};
  for (int c = 0; c < 4; ++c) {
    double acc = 0;
    for (int r = 0; r < 4; ++r) cum[c][r] = acc += std::max(0.0, t(r, c));
    for (int r = 0; r < 4; ++r) cum[c][r] /= acc;
  }
  const int n = arch.n_qubits, d = arch.depth();
  const double scale = std::ldexp(1.0, n);
  const std::size_t n_chunks = std::min<std::size_t>(n_samples, 64);
  std::vector<std::array<double, 4>> part(n_chunks);
  parallel_for(n_chunks, [&](std::size_t ci) {
    double sx = 0, sx2 = 0, sf = 0, sf2 = 0;
    for (std::size_t k = ci; k < n_samples; k += n_chunks) {
      auto g = stream(seed, 0x3c, k);
      std::uint64_t conf = 0;
      while (conf == 0) conf = n == 64 ? g() : (g() & ((std::uint64_t{1} << n) - 1));
      double w = 1.0;
      for (int l = 0; l < d && w != 0.0; ++l) {
        for (auto [a, b] : arch.layers[l]) {
          const int s = static_cast<int>(2 * ((conf >> a) & 1) + ((conf >> b) & 1));
          if (s == kII) continue;
          const double u = uniform01(g);
          int r = 0;
          while (r < 3 && u >= cum[s][r]) ++r;
          conf &= ~((std::uint64_t{1} << a) | (std::uint64_t{1} << b));
          conf |= (std::uint64_t{static_cast<unsigned>(r) >> 1} << a) |
                  (std::uint64_t{static_cast<unsigned>(r) & 1u} << b);
        }
        for (int q = 0; q < n; ++q)
          if ((conf >> q) & 1) w *= defects.at(l, q);
      }
      const double x = scale * w * std::pow(3.0, -popcount(conf));
      sx += x;
      sx2 += x * x;
      sf += w;
      sf2 += w * w;
    }
    part[ci] = {sx, sx2, sf, sf2};
  });
  std::array<std::vector<double>, 4> cols;
  for (auto& c : cols) c.resize(n_chunks);
  for (std::size_t ci = 0; ci < n_chunks; ++ci)
    for (int j = 0; j < 4; ++j) cols[j][ci] = part[ci][j];
  const double ns = static_cast<double>(n_samples);
  auto stat = [ns](double s, double s2, double& mean, double& se) {
    mean = s / ns;
    se = std::sqrt(std::max(0.0, (s2 - ns * mean * mean) / (ns - 1)) / ns);
  };
  MCResult r;
  r.n_samples = n_samples;
  const double vac = std::ldexp(1.0, -n), rest = 1.0 - vac;
  double mx, mf;
  stat(pairwise_sum(cols[0]), pairwise_sum(cols[1]), mx, r.xeb_se);
  stat(pairwise_sum(cols[2]), pairwise_sum(cols[3]), mf, r.fidelity_se);
  r.xeb = rest * mx;
  r.xeb_se *= rest;
  r.fidelity = vac + rest * mf;
  r.fidelity_se *= rest;
  return r;
}

// ---------------------------------------------------------------------------
// Weak-noise diagnostic: p ~ (alpha/4, 3 alpha beta/4)^{(x) N}.

struct WeakNoiseFit {
  double alpha = 0, beta = 0;
};

inline WeakNoiseFit fit_weak_noise(const ParticleDistribution& p) {
  const double total = evaluate_fidelity(p);
  if (total <= 0) return {};
  // Least squares for the common ratio m_Omega / (3 m_I) over the normalized
  // single-site marginals.
  double num = 0, den = 0;
  for (int q = 0; q < p.n_sites; ++q) {
    double occ = 0;
    for (std::size_t i = 0; i < p.weights.size(); ++i)
      if ((i >> q) & 1) occ += p.weights[i];
    const double mo = occ / total, mi = 1.0 - mo;
    num += 3.0 * mi * mo;
    den += 9.0 * mi * mi;
  }
  WeakNoiseFit f;
  f.beta = den > 0 ? num / den : 0;
  f.alpha = 4.0 * std::pow(total, 1.0 / p.n_sites) / (1.0 + 3.0 * f.beta);
  return f;
}

// ---------------------------------------------------------------------------
// Sweep export

struct SweepRow {
  int n = 0, d = 0;
  std::string ensemble;
  std::string defect;  // eps value or cut id
  double xeb = 0, fidelity = 0, xeb_se = 0, fidelity_se = 0;
};

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "N,d,ensemble,defect,xeb,fidelity,xeb_se,fidelity_se\n";
  out.precision(12);
  for (const auto& r : rows)
    out << r.n << ',' << r.d << ',' << r.ensemble << ',' << r.defect << ','
        << r.xeb << ',' << r.fidelity << ',' << r.xeb_se << ','
        << r.fidelity_se << '\n';
}

}  // namespace xeblab::dr
