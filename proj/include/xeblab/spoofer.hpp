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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "xeblab/metrics.hpp"
#include "xeblab/partition.hpp"
#include "xeblab/simulator.hpp"

namespace xeblab {

enum class SpoofMode { Omit, SelfAveraging };

struct TopK {
  std::size_t k = 0;
  std::vector<std::size_t> per_subsystem;  // k_i when selected per subsystem
};

struct SpoofOutput {
  SpoofMode mode = SpoofMode::Omit;
  std::vector<std::vector<int>> subsystems;
  std::vector<BitstringDistribution> parts;
  BitstringDistribution combined;
  std::vector<StateVector> states;  // omit mode only
  std::optional<TopK> top_k;
};

namespace detail {

// Ops of the compiled circuit restricted to one subsystem. Gates that
// straddle the boundary are handed to on_cut(op index in the full program,
// local qubit on this side).
template <typename OnCut>
Program restrict_program(const Program& full, const std::vector<int>& qubits,
                         OnCut&& on_cut) {
  std::vector<int> local(full.n_qubits, -1);
  for (std::size_t j = 0; j < qubits.size(); ++j)
    local[qubits[j]] = static_cast<int>(j);
  Program p{static_cast<int>(qubits.size()), {}};
  for (const Op& o : full.ops) {
    if (o.kind == Op::Gate2) {
      const int la = local[o.q0], lb = local[o.q1];
      if (la >= 0 && lb >= 0) {
        Op c = o;
        c.q0 = la;
        c.q1 = lb;
        p.ops.push_back(c);
      } else if (la >= 0 || lb >= 0) {
        on_cut(p, la >= 0 ? la : lb);
      }
      continue;
    }
    if (local[o.q0] < 0) continue;
    Op c = o;
    c.q0 = local[o.q0];
    p.ops.push_back(c);
  }
  return p;
}

inline void require_static(const Partition& part) {
  if (part.override_cuts)
    throw UnsupportedError(
        "per-subsystem simulation needs cuts derived from the subsystems");
}

inline SpoofOutput assemble(SpoofMode mode, int n, const Partition& part,
                            std::vector<BitstringDistribution> parts) {
  SpoofOutput out;
  out.mode = mode;
  out.subsystems = part.subsystems;
  out.parts = std::move(parts);
  if (n <= kStateVectorCap)
    out.combined = product_distribution(n, out.subsystems, out.parts);
  return out;
}

}  // namespace detail

// Omits every cut gate; dressing singles on both sides stay in place.
inline SpoofOutput run_basic(const CircuitInstance& c, const Partition& part,
                             int cap = kStateVectorCap) {
  detail::require_static(part);
  const Program full = compile(c);
  std::vector<BitstringDistribution> parts;
  std::vector<StateVector> states;
  for (const auto& qs : part.subsystems) {
    const Program p = detail::restrict_program(full, qs, [](Program&, int) {});
    states.push_back(run_program_pure(p, cap));
    parts.push_back(BitstringDistribution::from_state(states.back()));
  }
  SpoofOutput out =
      detail::assemble(SpoofMode::Omit, c.n_qubits(), part, std::move(parts));
  out.states = std::move(states);
  return out;
}

// Tensor product of subsystem states in the global qubit order.
inline StateVector product_state(int n_qubits,
                                 const std::vector<std::vector<int>>& qubits,
                                 const std::vector<StateVector>& parts) {
  StateVector out{n_qubits,
                  std::vector<cplx>(std::size_t{1} << n_qubits, cplx(1))};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& qs = qubits[i];
    for (std::size_t x = 0; x < out.amplitudes.size(); ++x) {
      std::size_t l = 0;
      for (std::size_t j = 0; j < qs.size(); ++j) l |= ((x >> qs[j]) & 1u) << j;
      out.amplitudes[x] *= parts[i].amplitudes[l];
    }
  }
  return out;
}

// Whole-system program with each cut gate replaced by MDN on both of its
// qubits. Works for override cut lists as well.
inline Program self_averaging_program(const CircuitInstance& c,
                                      const Partition& part) {
  Program full{c.n_qubits(), {}};
  const int n = c.n_qubits(), d = c.depth();
  auto dress = [&](int t) {
    if (!c.dressed()) return;
    for (int q = 0; q < n; ++q)
      full.ops.push_back(Op::gate1(q, c.single_qubit_gates[t][q]));
  };
  for (int t = 0; t < d; ++t) {
    dress(t);
    const Layer& layer = c.arch.layers[t];
    for (std::size_t j = 0; j < layer.size(); ++j) {
      if (part.is_cut(t, static_cast<int>(j))) {
        full.ops.push_back(Op::mdn(layer[j].first));
        full.ops.push_back(Op::mdn(layer[j].second));
      } else {
        full.ops.push_back(
            Op::gate2(layer[j].first, layer[j].second, c.two_qubit_gates[t][j]));
      }
    }
  }
  dress(d);
  return full;
}

// MDN on the subsystem-side qubit at every cut position. Subsystems above the
// density cap average pure runs over uniformly random Pauli insertions
// (I, X, Y, Z) at the cut positions instead.
inline SpoofOutput run_self_averaging(const CircuitInstance& c,
                                      const Partition& part,
                                      std::size_t fallback_samples = 256,
                                      std::uint64_t seed = 0) {
  if (part.override_cuts) {
    const DensityMatrix rho = run_program_density(self_averaging_program(c, part));
    SpoofOutput out;
    out.mode = SpoofMode::SelfAveraging;
    out.subsystems = {std::vector<int>(c.n_qubits())};
    std::iota(out.subsystems[0].begin(), out.subsystems[0].end(), 0);
    out.parts = {BitstringDistribution::from_density(rho)};
    out.combined = out.parts[0];
    return out;
  }
  const Program full = compile(c);
  std::vector<BitstringDistribution> parts;
  for (std::size_t s = 0; s < part.subsystems.size(); ++s) {
    const auto& qs = part.subsystems[s];
    if (static_cast<int>(qs.size()) <= kDensityCap) {
      const Program p = detail::restrict_program(
          full, qs, [](Program& pr, int q) { pr.ops.push_back(Op::mdn(q)); });
      parts.push_back(BitstringDistribution::from_density(run_program_density(p)));
      continue;
    }
    // Depolarizing channel at rate 3/4 is exactly the uniform Pauli twirl.
    const Program p = detail::restrict_program(full, qs, [](Program& pr, int q) {
      pr.ops.push_back(Op::noise(q, ChannelKind::Depolarizing, 0.75));
    });
    std::vector<double> acc(std::size_t{1} << qs.size(), 0.0);
    for (std::size_t k = 0; k < fallback_samples; ++k) {
      auto g = stream(seed, 0x5e1f, s, k);
      StateVector st = StateVector::zero(p.n_qubits);
      for (const Op& o : p.ops) {
        if (o.kind != Op::Channel) {
          apply_pure(st, o);
          continue;
        }
        const int mu = static_cast<int>(g() % 4);
        if (mu) kernel::apply1(st.amplitudes, o.q0, pauli(mu));
      }
      for (std::size_t x = 0; x < acc.size(); ++x)
        acc[x] += std::norm(st.amplitudes[x]);
    }
    for (double& v : acc) v /= static_cast<double>(fallback_samples);
    parts.push_back({static_cast<int>(qs.size()), std::move(acc), true});
  }
  return detail::assemble(SpoofMode::SelfAveraging, c.n_qubits(), part,
                          std::move(parts));
}

// ---------------------------------------------------------------------------
// MDN propagation through SWAP-times-controlled-phase gates

// True when D_side[G D_side[rho] G^dag] = D_other[D_side[rho]] for every
// two-qubit rho (side 0 is the gate's first qubit).
inline bool satisfies_mdn_identity(const Mat4& g, int side, double tol = 1e-12) {
  auto mdn = [](Mat4 r, int s) {
    Mat4 o = Mat4::Zero();
    // Local index 2*a + b; the traced bit is a for s == 0, b for s == 1.
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const int bi = s == 0 ? (i >> 1) : (i & 1);
        const int bj = s == 0 ? (j >> 1) : (j & 1);
        if (bi != bj) continue;
        const int fi = s == 0 ? 2 : 1;
        const int ri = i & ~fi, rj = j & ~fi;
        const cplx half = 0.5 * (r(ri, rj) + r(ri | fi, rj | fi));
        o(i, j) = half;
      }
    return o;
  };
  for (int e = 0; e < 16; ++e) {
    Mat4 rho = Mat4::Zero();
    rho(e / 4, e % 4) = 1;
    const Mat4 lhs = mdn(g * mdn(rho, side) * g.adjoint(), side);
    const Mat4 rhs = mdn(mdn(rho, side), 1 - side);
    if ((lhs - rhs).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

struct SimplifyResult {
  Program program;
  int removed_gates = 0;
};

// Repeatedly rewrites  MDN(q) .. G(q, r) .. MDN(q)  into  MDN(q) .. MDN(r),
// where the dots hold only single-qubit gates on q, and drops single-qubit
// gates that act on a wire right after MDN or right before another MDN.
inline SimplifyResult mdn_propagate_simplify(const Program& in) {
  std::vector<Op> ops = in.ops;
  std::vector<char> alive(ops.size(), 1);
  auto touches = [&](std::size_t i, int q) {
    const Op& o = ops[i];
    return o.q0 == q || (o.kind == Op::Gate2 && o.q1 == q);
  };
  auto is_mdn_on = [&](std::size_t i, int q) {
    return ops[i].kind == Op::Channel && ops[i].channel == ChannelKind::MDN &&
           ops[i].q0 == q;
  };
  // Nearest alive op on wire q that is not a single-qubit gate.
  auto neighbour = [&](std::size_t k, int q, int dir) -> long {
    for (long i = static_cast<long>(k) + dir;
         i >= 0 && i < static_cast<long>(ops.size()); i += dir) {
      if (!alive[i] || !touches(i, q)) continue;
      if (ops[i].kind == Op::Gate1) continue;
      return i;
    }
    return -1;
  };
  auto kill_singles = [&](long from, long to, int q) {
    for (long i = from + 1; i < to; ++i)
      if (alive[i] && ops[i].kind == Op::Gate1 && ops[i].q0 == q) alive[i] = 0;
  };

  int removed = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t k = 0; k < ops.size(); ++k) {
      if (!alive[k] || ops[k].kind != Op::Gate2) continue;
      for (int side = 0; side < 2 && alive[k]; ++side) {
        const int q = side == 0 ? ops[k].q0 : ops[k].q1;
        const int r = side == 0 ? ops[k].q1 : ops[k].q0;
        const long prev = neighbour(k, q, -1), next = neighbour(k, q, +1);
        if (prev < 0 || next < 0 || !is_mdn_on(prev, q) || !is_mdn_on(next, q))
          continue;
        if (!satisfies_mdn_identity(ops[k].u2, side))
          throw UnsupportedError(
              "gate between two MDNs is not of SWAP-controlled-phase form");
        kill_singles(prev, next, q);
        alive[next] = 0;
        ops[k] = Op::mdn(r);
        ++removed;
        changed = true;
      }
    }
    // Merge MDN runs and drop single-qubit gates adjacent to MDNs.
    for (std::size_t k = 0; k < ops.size(); ++k) {
      if (!alive[k] || ops[k].kind != Op::Channel ||
          ops[k].channel != ChannelKind::MDN)
        continue;
      const int q = ops[k].q0;
      const long next = neighbour(k, q, +1), prev = neighbour(k, q, -1);
      const long stop = next < 0 ? static_cast<long>(ops.size()) : next;
      for (long i = static_cast<long>(k) + 1; i < stop; ++i)
        if (alive[i] && ops[i].kind == Op::Gate1 && ops[i].q0 == q) {
          alive[i] = 0;
          changed = true;
        }
      for (long i = prev + 1; i < static_cast<long>(k); ++i)
        if (alive[i] && ops[i].kind == Op::Gate1 && ops[i].q0 == q) {
          alive[i] = 0;
          changed = true;
        }
      if (next >= 0 && is_mdn_on(next, q)) {
        alive[next] = 0;
        changed = true;
      }
    }
  }
  SimplifyResult res{{in.n_qubits, {}}, removed};
  for (std::size_t i = 0; i < ops.size(); ++i)
    if (alive[i]) res.program.ops.push_back(ops[i]);
  return res;
}

inline SimplifyResult mdn_propagate_simplify(const CircuitInstance& c,
                                             const Partition& part) {
  return mdn_propagate_simplify(self_averaging_program(c, part));
}

// ---------------------------------------------------------------------------
// Top-k

// Indices of the k largest entries; ties go to the lowest index.
inline std::vector<std::size_t> top_indices(const std::vector<double>& q,
                                            std::size_t k) {
  std::vector<std::size_t> idx(q.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto cmp = [&](std::size_t a, std::size_t b) {
    return q[a] != q[b] ? q[a] > q[b] : a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(k), idx.end(), cmp);
  idx.resize(k);
  return idx;
}

inline BitstringDistribution top_k_distribution(const BitstringDistribution& q,
                                                std::size_t k) {
  if (k == 0) throw std::invalid_argument("top-k needs k > 0");
  if (k > q.size()) throw std::invalid_argument("top-k exceeds support");
  BitstringDistribution out{q.n_qubits, std::vector<double>(q.size(), 0.0)};
  for (std::size_t i : top_indices(q.probabilities, k))
    out.probabilities[i] = 1.0 / static_cast<double>(k);
  return out;
}

// Top-k over the combined distribution.
inline SpoofOutput top_k(const SpoofOutput& s, std::size_t k) {
  SpoofOutput out = s;
  out.combined = top_k_distribution(s.combined, k);
  out.top_k = TopK{k, {}};
  return out;
}

namespace detail {

// Qubits whose marginal is uniform and independent of the rest.
inline std::vector<int> trivial_qubits(const BitstringDistribution& p,
                                       double tol = 1e-12) {
  std::vector<int> out;
  for (int j = 0; j < p.n_qubits; ++j) {
    const std::size_t s = std::size_t{1} << j;
    bool triv = true;
    for (std::size_t x = 0; x < p.size() && triv; ++x)
      if (!(x & s) && std::abs(p[x] - p[x | s]) > tol) triv = false;
    if (triv) out.push_back(j);
  }
  return out;
}

}  // namespace detail

// Per-subsystem top-k_i on the non-trivial qubits; trivial qubits are then
// expanded uniformly.
inline SpoofOutput top_k_factorized(const SpoofOutput& s,
                                    const std::vector<std::size_t>& ks) {
  if (ks.size() != s.parts.size())
    throw std::invalid_argument("one k per subsystem required");
  SpoofOutput out = s;
  std::size_t total = 1;
  for (std::size_t i = 0; i < s.parts.size(); ++i) {
    const auto& p = s.parts[i];
    const auto triv = detail::trivial_qubits(p);
    std::vector<int> keep;
    for (int j = 0; j < p.n_qubits; ++j)
      if (std::find(triv.begin(), triv.end(), j) == triv.end()) keep.push_back(j);
    BitstringDistribution marg{static_cast<int>(keep.size()),
                               std::vector<double>(std::size_t{1} << keep.size(), 0.0)};
    for (std::size_t x = 0; x < p.size(); ++x) {
      std::size_t l = 0;
      for (std::size_t j = 0; j < keep.size(); ++j) l |= ((x >> keep[j]) & 1u) << j;
      marg.probabilities[l] += p[x];
    }
    const std::size_t k = std::min(ks[i], marg.size());
    const auto chosen = top_k_distribution(marg, k);
    BitstringDistribution sel{p.n_qubits, std::vector<double>(p.size(), 0.0)};
    const double expand = std::ldexp(1.0, -static_cast<int>(triv.size()));
    for (std::size_t x = 0; x < p.size(); ++x) {
      std::size_t l = 0;
      for (std::size_t j = 0; j < keep.size(); ++j) l |= ((x >> keep[j]) & 1u) << j;
      sel.probabilities[x] = chosen[l] * expand;
    }
    out.parts[i] = std::move(sel);
    total *= k;
  }
  if (s.combined.n_qubits > 0 || !s.combined.probabilities.empty())
    out.combined = product_distribution(s.combined.n_qubits, out.subsystems, out.parts);
  out.top_k = TopK{total, ks};
  return out;
}

// ---------------------------------------------------------------------------
// XQUATH

// 2^{2N} [(p0 - 2^-N)^2 - (p0 - q0)^2] for one circuit, at x = 0^N.
inline double xquath_term(const BitstringDistribution& p,
                          const BitstringDistribution& q) {
  const double dim = static_cast<double>(p.size());
  const double a = dim * p[0] - 1.0, b = dim * (p[0] - q[0]);
  return a * a - b * b;
}

}  // namespace xeblab
