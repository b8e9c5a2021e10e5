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

#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "xeblab/circuits.hpp"

namespace xeblab {

// Bitstring x stores qubit q in bit q.
using Bitstring = std::uint64_t;

enum class NoiseKind { Depolarizing, AmplitudeDamping };

struct NoiseModel {
  NoiseKind kind = NoiseKind::Depolarizing;
  double rate = 0.0;

  void validate() const {
    if (!(rate >= 0.0 && rate <= 1.0))
      throw std::invalid_argument("noise rate must lie in [0, 1]");
  }
};

enum class ChannelKind { Depolarizing, AmplitudeDamping, MDN };

// One step of a compiled program. Backends interpret channels differently:
// run_density applies them exactly, run_trajectories unravels depolarizing
// channels, pure simulation rejects them.
struct Op {
  enum Kind { Gate1, Gate2, Channel } kind;
  int q0 = 0, q1 = 0;
  Mat2 u1 = Mat2::Identity();
  Mat4 u2 = Mat4::Identity();
  ChannelKind channel = ChannelKind::MDN;
  double rate = 0.0;

  static Op gate1(int q, const Mat2& u) {
    Op o{Gate1};
    o.q0 = q;
    o.u1 = u;
    return o;
  }
  static Op gate2(int a, int b, const Mat4& u) {
    Op o{Gate2};
    o.q0 = a;
    o.q1 = b;
    o.u2 = u;
    return o;
  }
  static Op noise(int q, ChannelKind k, double rate) {
    Op o{Channel};
    o.q0 = q;
    o.channel = k;
    o.rate = rate;
    return o;
  }
  static Op mdn(int q) { return noise(q, ChannelKind::MDN, 1.0); }
};

struct Program {
  int n_qubits = 0;
  std::vector<Op> ops;

  int two_qubit_count() const {
    int k = 0;
    for (const Op& o : ops) k += o.kind == Op::Gate2;
    return k;
  }
  bool has_channels() const {
    for (const Op& o : ops)
      if (o.kind == Op::Channel) return true;
    return false;
  }
};

inline ChannelKind channel_of(NoiseKind k) {
  return k == NoiseKind::Depolarizing ? ChannelKind::Depolarizing
                                      : ChannelKind::AmplitudeDamping;
}

// Dressing layer t, entangling layer t, noise on every qubit; then the final
// dressing layer.
inline Program compile(const CircuitInstance& c,
                       const std::optional<NoiseModel>& noise = std::nullopt) {
  Program p{c.n_qubits(), {}};
  const int n = c.n_qubits(), d = c.depth();
  auto dress = [&](int t) {
    if (!c.dressed()) return;
    for (int q = 0; q < n; ++q)
      p.ops.push_back(Op::gate1(q, c.single_qubit_gates[t][q]));
  };
  for (int t = 0; t < d; ++t) {
    dress(t);
    const Layer& layer = c.arch.layers[t];
    for (std::size_t j = 0; j < layer.size(); ++j)
      p.ops.push_back(
          Op::gate2(layer[j].first, layer[j].second, c.two_qubit_gates[t][j]));
    if (noise && noise->rate > 0)
      for (int q = 0; q < n; ++q)
        p.ops.push_back(Op::noise(q, channel_of(noise->kind), noise->rate));
  }
  dress(d);
  return p;
}

// ---------------------------------------------------------------------------
// Kernels over a vector of 2^m amplitudes.

namespace kernel {

inline void apply1(std::vector<cplx>& v, int q, const Mat2& u) {
  const std::size_t s = std::size_t{1} << q, n = v.size();
  const cplx u00 = u(0, 0), u01 = u(0, 1), u10 = u(1, 0), u11 = u(1, 1);
  for (std::size_t hi = 0; hi < n; hi += 2 * s)
    for (std::size_t i = hi; i < hi + s; ++i) {
      const cplx a = v[i], b = v[i | s];
      v[i] = u00 * a + u01 * b;
      v[i | s] = u10 * a + u11 * b;
    }
}

// Local basis index 2 * bit_a + bit_b.
inline void apply2(std::vector<cplx>& v, int qa, int qb, const Mat4& u) {
  const std::size_t sa = std::size_t{1} << qa, sb = std::size_t{1} << qb;
  const std::size_t mask = sa | sb, n = v.size();
  cplx m[16];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m[4 * r + c] = u(r, c);
  for (std::size_t i = 0; i < n; ++i) {
    if (i & mask) continue;
    const std::size_t idx[4] = {i, i | sb, i | sa, i | sa | sb};
    const cplx x[4] = {v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]};
    for (int r = 0; r < 4; ++r)
      v[idx[r]] = m[4 * r] * x[0] + m[4 * r + 1] * x[1] + m[4 * r + 2] * x[2] +
                  m[4 * r + 3] * x[3];
  }
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// States

struct StateVector {
  int n_qubits = 0;
  std::vector<cplx> amplitudes;

  static StateVector zero(int n) {
    StateVector s{n, std::vector<cplx>(std::size_t{1} << n)};
    s.amplitudes[0] = 1;
    return s;
  }
  double norm2() const {
    std::vector<double> a(amplitudes.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::norm(amplitudes[i]);
    return pairwise_sum(a);
  }
};

// entries[r * 2^n + c]; viewed as a 2n-qubit vector, row bit q sits at q + n.
struct DensityMatrix {
  int n_qubits = 0;
  std::vector<cplx> entries;

  std::size_t dim() const { return std::size_t{1} << n_qubits; }
  cplx operator()(std::size_t r, std::size_t c) const {
    return entries[r * dim() + c];
  }
  static DensityMatrix pure(const StateVector& s) {
    const std::size_t d = s.amplitudes.size();
    DensityMatrix m{s.n_qubits, std::vector<cplx>(d * d)};
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        m.entries[r * d + c] = s.amplitudes[r] * std::conj(s.amplitudes[c]);
    return m;
  }
  cplx trace() const {
    cplx t = 0;
    for (std::size_t r = 0; r < dim(); ++r) t += (*this)(r, r);
    return t;
  }
};

struct BitstringDistribution {
  int n_qubits = 0;
  std::vector<double> probabilities;
  bool normalized = true;

  std::size_t size() const { return probabilities.size(); }
  double operator[](std::size_t x) const { return probabilities[x]; }

  static BitstringDistribution uniform(int n) {
    const std::size_t d = std::size_t{1} << n;
    return {n, std::vector<double>(d, 1.0 / static_cast<double>(d)), true};
  }
  static BitstringDistribution from_state(const StateVector& s) {
    BitstringDistribution p{s.n_qubits, std::vector<double>(s.amplitudes.size())};
    for (std::size_t i = 0; i < p.size(); ++i)
      p.probabilities[i] = std::norm(s.amplitudes[i]);
    return p;
  }
  static BitstringDistribution from_density(const DensityMatrix& rho) {
    BitstringDistribution p{rho.n_qubits, std::vector<double>(rho.dim())};
    for (std::size_t i = 0; i < p.size(); ++i)
      p.probabilities[i] = std::max(0.0, rho(i, i).real());
    return p;
  }
  double total() const { return pairwise_sum(probabilities); }
};

// ---------------------------------------------------------------------------
// Pure-state backend

inline constexpr int kStateVectorCap = 26;
inline constexpr int kDensityCap = 12;

inline void apply_pure(StateVector& s, const Op& o) {
  switch (o.kind) {
    case Op::Gate1: kernel::apply1(s.amplitudes, o.q0, o.u1); break;
    case Op::Gate2: kernel::apply2(s.amplitudes, o.q0, o.q1, o.u2); break;
    case Op::Channel:
      throw UnsupportedError("pure-state simulation cannot apply channels");
  }
}

inline StateVector run_program_pure(const Program& p,
                                    int cap = kStateVectorCap) {
  if (p.n_qubits > cap)
    throw ResourceError("state vector of " + std::to_string(p.n_qubits) +
                        " qubits exceeds cap " + std::to_string(cap));
  StateVector s = StateVector::zero(p.n_qubits);
  for (const Op& o : p.ops) apply_pure(s, o);
  return s;
}

inline StateVector run_pure(const CircuitInstance& c,
                            int cap = kStateVectorCap) {
  return run_program_pure(compile(c), cap);
}

// ---------------------------------------------------------------------------
// Density-matrix backend

inline void apply_channel(DensityMatrix& rho, int q, ChannelKind k,
                          double rate) {
  const int n = rho.n_qubits;
  const std::size_t sc = std::size_t{1} << q, sr = std::size_t{1} << (q + n);
  const std::size_t mask = sc | sr, total = rho.entries.size();
  auto& e = rho.entries;
  for (std::size_t i = 0; i < total; ++i) {
    if (i & mask) continue;
    cplx& e00 = e[i];
    cplx& e01 = e[i | sc];
    cplx& e10 = e[i | sr];
    cplx& e11 = e[i | sr | sc];
    switch (k) {
      case ChannelKind::Depolarizing: {
        // (1 - eps) rho + eps/3 sum_sigma sigma rho sigma
        //   = (1 - 4 eps/3) rho + (2 eps/3) I (x) Tr_q rho
        const double keep = 1.0 - 4.0 * rate / 3.0, mix = 2.0 * rate / 3.0;
        const cplx s = e00 + e11;
        e00 = keep * e00 + mix * s;
        e11 = keep * e11 + mix * s;
        e01 *= keep;
        e10 *= keep;
        break;
      }
      case ChannelKind::AmplitudeDamping: {
        const double r = std::sqrt(1.0 - rate);
        e00 += rate * e11;
        e11 *= 1.0 - rate;
        e01 *= r;
        e10 *= r;
        break;
      }
      case ChannelKind::MDN: {
        const cplx s = 0.5 * (e00 + e11);
        e00 = e11 = s;
        e01 = e10 = 0;
        break;
      }
    }
  }
}

inline void apply_density(DensityMatrix& rho, const Op& o) {
  const int n = rho.n_qubits;
  switch (o.kind) {
    case Op::Gate1:
      kernel::apply1(rho.entries, o.q0 + n, o.u1);
      kernel::apply1(rho.entries, o.q0, o.u1.conjugate());
      break;
    case Op::Gate2:
      kernel::apply2(rho.entries, o.q0 + n, o.q1 + n, o.u2);
      kernel::apply2(rho.entries, o.q0, o.q1, o.u2.conjugate());
      break;
    case Op::Channel: apply_channel(rho, o.q0, o.channel, o.rate); break;
  }
}

inline DensityMatrix run_program_density(const Program& p,
                                         int cap = kDensityCap) {
  if (p.n_qubits > cap)
    throw ResourceError("density matrix of " + std::to_string(p.n_qubits) +
                        " qubits exceeds cap " + std::to_string(cap));
  const std::size_t d = std::size_t{1} << p.n_qubits;
  DensityMatrix rho{p.n_qubits, std::vector<cplx>(d * d)};
  rho.entries[0] = 1;
  for (const Op& o : p.ops) apply_density(rho, o);
  return rho;
}

inline DensityMatrix run_density(const CircuitInstance& c,
                                 const NoiseModel& noise,
                                 int cap = kDensityCap) {
  noise.validate();
  return run_program_density(compile(c, noise), cap);
}

// ---------------------------------------------------------------------------
// Fidelity

inline double clip_unit(double f) {
  if (f < 0 && f > -1e-12) return 0;
  if (f > 1 && f < 1 + 1e-12) return 1;
  return f;
}

inline double fidelity(const StateVector& psi, const DensityMatrix& rho) {
  if (psi.n_qubits != rho.n_qubits)
    throw std::invalid_argument("fidelity: qubit count mismatch");
  const std::size_t d = rho.dim();
  std::vector<cplx> rows(d);
  for (std::size_t r = 0; r < d; ++r) {
    cplx acc = 0;
    for (std::size_t c = 0; c < d; ++c) acc += rho(r, c) * psi.amplitudes[c];
    rows[r] = std::conj(psi.amplitudes[r]) * acc;
  }
  return clip_unit(pairwise_sum(rows).real());
}

inline double fidelity(const StateVector& psi, const StateVector& phi) {
  if (psi.n_qubits != phi.n_qubits)
    throw std::invalid_argument("fidelity: qubit count mismatch");
  std::vector<cplx> t(psi.amplitudes.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = std::conj(psi.amplitudes[i]) * phi.amplitudes[i];
  return clip_unit(std::norm(pairwise_sum(t)));
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryResult {
  BitstringDistribution distribution;
  std::vector<double> distribution_se;
  double fidelity = 0;
  double fidelity_se = 0;
};

namespace detail {

// Compensated running sums of x and x^2.
struct Kahan {
  double sum = 0, c = 0;
  void add(double x) {
    const double y = x - c, t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace detail

inline TrajectoryResult run_trajectories(const CircuitInstance& circuit,
                                         const NoiseModel& noise,
                                         std::size_t n_traj,
                                         std::uint64_t seed,
                                         int cap = kStateVectorCap) {
  noise.validate();
  if (noise.kind != NoiseKind::Depolarizing)
    throw UnsupportedError(
        "amplitude damping has no Pauli unraveling; use run_density");
  if (n_traj == 0) throw std::invalid_argument("n_traj must be positive");
  const Program prog = compile(circuit, noise);
  const StateVector ideal = run_pure(circuit, cap);
  const std::size_t dim = ideal.amplitudes.size();

  // Fixed chunking keeps the reduction independent of the thread count.
  const std::size_t n_chunks = std::min<std::size_t>(n_traj, 64);
  struct Partial {
    std::vector<detail::Kahan> p, p2;
    detail::Kahan f, f2;
  };
  std::vector<Partial> parts(n_chunks);
  parallel_for(n_chunks, [&](std::size_t ci) {
    Partial& part = parts[ci];
    part.p.assign(dim, {});
    part.p2.assign(dim, {});
    for (std::size_t k = ci; k < n_traj; k += n_chunks) {
      auto g = stream(seed, 0x7a11, k);
      StateVector s = StateVector::zero(prog.n_qubits);
      for (const Op& o : prog.ops) {
        if (o.kind != Op::Channel) {
          apply_pure(s, o);
          continue;
        }
        const double u = uniform01(g);
        if (u < o.rate) {
          const int mu = 1 + static_cast<int>(g() % 3);
          kernel::apply1(s.amplitudes, o.q0, pauli(mu));
        }
      }
      for (std::size_t x = 0; x < dim; ++x) {
        const double px = std::norm(s.amplitudes[x]);
        part.p[x].add(px);
        part.p2[x].add(px * px);
      }
      const double fk = fidelity(ideal, s);
      part.f.add(fk);
      part.f2.add(fk * fk);
    }
  });

  const double n = static_cast<double>(n_traj);
  auto finish = [n](double s, double s2, double& mean, double& se) {
    mean = s / n;
    const double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1)) : 0;
    se = std::sqrt(var / n);
  };
  TrajectoryResult res;
  res.distribution = {prog.n_qubits, std::vector<double>(dim), true};
  res.distribution_se.resize(dim);
  for (std::size_t x = 0; x < dim; ++x) {
    std::vector<double> s(n_chunks), s2(n_chunks);
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
      s[ci] = parts[ci].p[x].sum;
      s2[ci] = parts[ci].p2[x].sum;
    }
    finish(pairwise_sum(s), pairwise_sum(s2), res.distribution.probabilities[x],
           res.distribution_se[x]);
  }
  std::vector<double> fs(n_chunks), fs2(n_chunks);
  for (std::size_t ci = 0; ci < n_chunks; ++ci) {
    fs[ci] = parts[ci].f.sum;
    fs2[ci] = parts[ci].f2.sum;
  }
  finish(pairwise_sum(fs), pairwise_sum(fs2), res.fidelity, res.fidelity_se);
  return res;
}

// ---------------------------------------------------------------------------
// Sampling and statistics

inline std::vector<Bitstring> sample_bitstrings(const BitstringDistribution& p,
                                                std::size_t m,
                                                std::uint64_t seed) {
  if (!p.normalized)
    throw std::invalid_argument("sampling needs a normalized distribution");
  std::vector<double> cdf(p.size());
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = acc += p[i];
  auto g = stream(seed, 0x5a3b1e);
  std::vector<Bitstring> out(m);
  for (auto& x : out) {
    const double u = uniform01(g) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    x = static_cast<Bitstring>(it - cdf.begin());
  }
  return out;
}

// [2^{N(k-1)}/k!] sum_x p(x)^k, evaluated as (1/2^N) sum (2^N p)^k / k!.
inline double pt_moment_ratio(const BitstringDistribution& p, int k) {
  if (k < 1) throw std::invalid_argument("moment order must be >= 1");
  const double dim = static_cast<double>(p.size());
  std::vector<double> t(p.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::pow(dim * p[i], k);
  return pairwise_sum(t) / dim / std::tgamma(k + 1.0);
}

// ---------------------------------------------------------------------------
// Export

inline void write_distribution_csv(const BitstringDistribution& p,
                                   const std::string& path) {
  std::ofstream out(path);
  out << "index,probability\n";
  out.precision(17);
  for (std::size_t i = 0; i < p.size(); ++i) out << i << ',' << p[i] << '\n';
}

inline void write_distribution_binary(const BitstringDistribution& p,
                                      const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "binary export assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(p.probabilities.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
}

inline BitstringDistribution read_distribution_binary(const std::string& path,
                                                      int n_qubits) {
  BitstringDistribution p{n_qubits,
                          std::vector<double>(std::size_t{1} << n_qubits)};
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(p.probabilities.data()),
          static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!in) throw std::runtime_error("short read from " + path);
  return p;
}

}  // namespace xeblab
