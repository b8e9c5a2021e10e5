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

#include <cmath>
#include <vector>

#include "xeblab/simulator.hpp"

namespace xeblab {

struct EnsembleStat {
  double mean = 0;
  double std = 0;
  double standard_error = 0;
  std::size_t n_instances = 0;
};

// 2^N sum_x p(x) q(x) - 1.
inline double xeb_exact(const BitstringDistribution& p,
                        const BitstringDistribution& q) {
  if (p.n_qubits != q.n_qubits || p.size() != q.size())
    throw std::invalid_argument("xeb: distribution size mismatch");
  if (!p.normalized || !q.normalized)
    throw std::invalid_argument("xeb: unnormalized distribution");
  std::vector<double> t(p.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = p[i] * q[i];
  return static_cast<double>(p.size()) * pairwise_sum(t) - 1.0;
}

inline double xeb_empirical(const BitstringDistribution& p,
                            const std::vector<Bitstring>& samples) {
  if (samples.empty()) throw std::invalid_argument("xeb: no samples");
  std::vector<double> t(samples.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = p[samples[i]];
  return static_cast<double>(p.size()) * pairwise_sum(t) /
             static_cast<double>(samples.size()) -
         1.0;
}

inline EnsembleStat ensemble_average(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("empty ensemble");
  EnsembleStat s;
  s.n_instances = values.size();
  const double n = static_cast<double>(values.size());
  s.mean = pairwise_sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> d(values.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = (values[i] - s.mean) * (values[i] - s.mean);
    s.std = std::sqrt(pairwise_sum(d) / (n - 1));
  }
  s.standard_error = s.std / std::sqrt(n);
  return s;
}

// Tensor product of per-block distributions; block i occupies the qubits
// listed in qubits[i] (bit j of its local index maps to qubits[i][j]).
inline BitstringDistribution product_distribution(
    int n_qubits, const std::vector<std::vector<int>>& qubits,
    const std::vector<BitstringDistribution>& parts) {
  BitstringDistribution out{n_qubits,
                            std::vector<double>(std::size_t{1} << n_qubits, 1.0)};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.normalized = out.normalized && parts[i].normalized;
    const auto& qs = qubits[i];
    for (std::size_t x = 0; x < out.size(); ++x) {
      std::size_t local = 0;
      for (std::size_t j = 0; j < qs.size(); ++j)
        local |= ((x >> qs[j]) & 1u) << j;
      out.probabilities[x] *= parts[i][local];
    }
  }
  return out;
}

}  // namespace xeblab
