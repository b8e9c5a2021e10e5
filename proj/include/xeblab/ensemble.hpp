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

#include <limits>
#include <vector>

#include "xeblab/metrics.hpp"
#include "xeblab/spoofer.hpp"

// Per-circuit metrics and their ensemble averages by direct simulation.
namespace xeblab {

inline std::uint64_t instance_seed(std::uint64_t master, std::size_t i) {
  return splitmix64(master ^ splitmix64(0xc1c0 + i));
}

// f(circuit) for n sampled instances, in instance order.
template <typename R, typename F>
std::vector<R> map_circuits(const Architecture& arch, const GateEnsemble& ens,
                            std::size_t n, std::uint64_t seed, F&& f) {
  std::vector<R> out(n);
  parallel_for(n, [&](std::size_t i) {
    out[i] = f(sample_circuit(arch, ens, instance_seed(seed, i)));
  });
  return out;
}

struct CircuitMetrics {
  double xeb = 0;
  double fidelity = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsStat {
  EnsembleStat xeb, fidelity;
};

inline MetricsStat summarize(const std::vector<CircuitMetrics>& v) {
  std::vector<double> x(v.size()), f(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    x[i] = v[i].xeb;
    f[i] = v[i].fidelity;
  }
  MetricsStat s{ensemble_average(x), {}};
  if (!v.empty() && !std::isnan(f[0])) s.fidelity = ensemble_average(f);
  return s;
}

inline CircuitMetrics ideal_metrics(const CircuitInstance& c) {
  const auto p = BitstringDistribution::from_state(run_pure(c));
  return {xeb_exact(p, p), 1.0};
}

inline CircuitMetrics noisy_metrics(const CircuitInstance& c,
                                    const NoiseModel& noise) {
  const StateVector psi = run_pure(c);
  const DensityMatrix rho = run_density(c, noise);
  return {xeb_exact(BitstringDistribution::from_state(psi),
                    BitstringDistribution::from_density(rho)),
          fidelity(psi, rho)};
}

inline CircuitMetrics omit_metrics(const CircuitInstance& c,
                                   const Partition& part) {
  const StateVector psi = run_pure(c);
  const SpoofOutput s = run_basic(c, part);
  return {xeb_exact(BitstringDistribution::from_state(psi), s.combined),
          fidelity(psi, product_state(c.n_qubits(), s.subsystems, s.states))};
}

// Fidelity needs the whole-system density matrix, so it is left NaN above
// the density cap.
inline CircuitMetrics self_averaging_metrics(const CircuitInstance& c,
                                             const Partition& part) {
  const StateVector psi = run_pure(c);
  const auto p = BitstringDistribution::from_state(psi);
  if (c.n_qubits() <= kDensityCap) {
    const DensityMatrix rho = run_program_density(self_averaging_program(c, part));
    return {xeb_exact(p, BitstringDistribution::from_density(rho)),
            fidelity(psi, rho)};
  }
  return {xeb_exact(p, run_self_averaging(c, part).combined)};
}

// The spoof circuit keeps every gate but draws fresh, independent Haar gates
// at the cut positions.
inline CircuitMetrics independent_cut_metrics(const CircuitInstance& c,
                                              const Partition& part) {
  const StateVector psi = run_pure(c);
  CircuitInstance alt = c;
  for (const CutGate& g : part.cut_gates) {
    auto gen = stream(c.seed, 0x1dc7, g.layer, g.pair);
    alt.two_qubit_gates[g.layer][g.pair] = haar_unitary<4>(gen);
  }
  const StateVector phi = run_pure(alt);
  return {xeb_exact(BitstringDistribution::from_state(psi),
                    BitstringDistribution::from_state(phi)),
          fidelity(psi, phi)};
}

// ---------------------------------------------------------------------------
// XQUATH statistic

struct XquathResult {
  EnsembleStat delta, xeb;
  EnsembleStat difference;  // per-circuit delta - chi
};

// 2^{2N} E[(p(0) - 2^-N)^2 - (p(0) - q(0))^2] with q from self-averaging,
// next to the mean chi of the same circuits.
inline XquathResult xquath_delta(const Architecture& arch,
                                 const GateEnsemble& ens, const Partition& part,
                                 std::size_t n, std::uint64_t seed) {
  if (arch.n_qubits > 10)
    throw std::invalid_argument("xquath statistic is limited to N <= 10");
  struct Row {
    double delta, xeb;
  };
  const auto rows = map_circuits<Row>(arch, ens, n, seed, [&](const CircuitInstance& c) {
    const auto p = BitstringDistribution::from_state(run_pure(c));
    const auto q = run_self_averaging(c, part).combined;
    return Row{xquath_term(p, q), xeb_exact(p, q)};
  });
  std::vector<double> d(n), x(n), diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = rows[i].delta;
    x[i] = rows[i].xeb;
    diff[i] = d[i] - x[i];
  }
  return {ensemble_average(d), ensemble_average(x), ensemble_average(diff)};
}

// ---------------------------------------------------------------------------
// Error insertion

struct ErrorSite {
  int layer = 0;
  int qubit = 0;
  bool before = false;  // before or after entangling layer `layer`
  int pauli = 1;
};

// Compiled ideal circuit with Pauli errors inserted next to an entangling
// layer.
inline Program compile_with_errors(const CircuitInstance& c,
                                   const std::vector<ErrorSite>& errors) {
  for (const ErrorSite& e : errors)
    if (e.layer < 0 || e.layer >= c.depth() || e.qubit < 0 ||
        e.qubit >= c.n_qubits() || e.pauli < 1 || e.pauli > 3)
      throw std::invalid_argument("error site outside the circuit");
  Program p{c.n_qubits(), {}};
  const int n = c.n_qubits(), d = c.depth();
  auto dress = [&](int t) {
    if (!c.dressed()) return;
    for (int q = 0; q < n; ++q) p.ops.push_back(Op::gate1(q, c.single_qubit_gates[t][q]));
  };
  auto insert = [&](int t, bool before) {
    for (const ErrorSite& e : errors)
      if (e.layer == t && e.before == before)
        p.ops.push_back(Op::gate1(e.qubit, pauli(e.pauli)));
  };
  for (int t = 0; t < d; ++t) {
    dress(t);
    insert(t, true);
    const Layer& layer = c.arch.layers[t];
    for (std::size_t j = 0; j < layer.size(); ++j)
      p.ops.push_back(Op::gate2(layer[j].first, layer[j].second, c.two_qubit_gates[t][j]));
    insert(t, false);
  }
  dress(d);
  return p;
}

inline CircuitMetrics error_metrics(const CircuitInstance& c,
                                    const std::vector<ErrorSite>& errors) {
  const StateVector psi = run_pure(c);
  const StateVector phi = run_program_pure(compile_with_errors(c, errors));
  return {xeb_exact(BitstringDistribution::from_state(psi),
                    BitstringDistribution::from_state(phi)),
          fidelity(psi, phi)};
}

// Qubits reached at the output by an error placed after layer `layer`.
inline int forward_lightcone(const Architecture& arch, int layer, int qubit) {
  std::vector<char> in(arch.n_qubits, 0);
  in[qubit] = 1;
  for (int t = layer + 1; t < arch.depth(); ++t)
    for (auto [a, b] : arch.layers[t])
      if (in[a] || in[b]) in[a] = in[b] = 1;
  int s = 0;
  for (char x : in) s += x;
  return s;
}

}  // namespace xeblab
