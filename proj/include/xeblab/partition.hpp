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
#include <set>
#include <vector>

#include "xeblab/circuits.hpp"

namespace xeblab {

struct CutGate {
  int layer = 0;
  int pair = 0;  // index into arch.layers[layer]
  auto operator<=>(const CutGate&) const = default;
};

struct Partition {
  std::vector<std::vector<int>> subsystems;
  std::vector<CutGate> cut_gates;
  // True when cut_gates came from an explicit override list; such cuts need
  // not follow the static subsystems, so only whole-system backends apply.
  bool override_cuts = false;

  int max_subsystem_size() const {
    std::size_t l = 0;
    for (const auto& s : subsystems) l = std::max(l, s.size());
    return static_cast<int>(l);
  }

  std::vector<int> owner(int n_qubits) const {
    std::vector<int> o(n_qubits, -1);
    for (std::size_t i = 0; i < subsystems.size(); ++i)
      for (int q : subsystems[i]) o[q] = static_cast<int>(i);
    return o;
  }

  bool is_cut(int layer, int pair) const {
    return std::binary_search(cut_gates.begin(), cut_gates.end(),
                              CutGate{layer, pair});
  }
};

namespace detail {

inline void check_cover(int n_qubits,
                        const std::vector<std::vector<int>>& subsystems) {
  std::vector<int> seen(n_qubits, 0);
  for (const auto& s : subsystems) {
    if (s.empty()) throw std::invalid_argument("empty subsystem in cut spec");
    for (int q : s) {
      if (q < 0 || q >= n_qubits)
        throw std::invalid_argument("cut spec qubit out of range: " +
                                    std::to_string(q));
      if (seen[q]++)
        throw std::invalid_argument("cut spec lists qubit " +
                                    std::to_string(q) + " twice");
    }
  }
  for (int q = 0; q < n_qubits; ++q)
    if (!seen[q])
      throw std::invalid_argument("cut spec misses qubit " + std::to_string(q));
}

}  // namespace detail

inline Partition make_cut(const Architecture& arch,
                          std::vector<std::vector<int>> subsystems) {
  detail::check_cover(arch.n_qubits, subsystems);
  for (auto& s : subsystems) std::sort(s.begin(), s.end());
  Partition p{std::move(subsystems), {}, false};
  const auto own = p.owner(arch.n_qubits);
  for (int t = 0; t < arch.depth(); ++t)
    for (std::size_t j = 0; j < arch.layers[t].size(); ++j) {
      const auto [a, b] = arch.layers[t][j];
      if (own[a] != own[b]) p.cut_gates.push_back({t, static_cast<int>(j)});
    }
  return p;
}

// Explicit cut list, e.g. for cuts that move in time.
inline Partition make_cut_override(const Architecture& arch,
                                   std::vector<std::vector<int>> subsystems,
                                   std::vector<CutGate> cuts) {
  detail::check_cover(arch.n_qubits, subsystems);
  for (const CutGate& c : cuts)
    if (c.layer < 0 || c.layer >= arch.depth() || c.pair < 0 ||
        c.pair >= static_cast<int>(arch.layers[c.layer].size()))
      throw std::invalid_argument("cut override outside the architecture");
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return {std::move(subsystems), std::move(cuts), true};
}

// Contiguous blocks of the given sizes, in qubit order.
inline std::vector<std::vector<int>> contiguous_blocks(
    const std::vector<int>& sizes) {
  std::vector<std::vector<int>> out;
  int q = 0;
  for (int s : sizes) {
    std::vector<int> b(s);
    for (int& x : b) x = q++;
    out.push_back(std::move(b));
  }
  return out;
}

inline std::vector<std::vector<int>> halves(int n) {
  return contiguous_blocks({n / 2, n - n / 2});
}

// Cut lines on a periodic 1D brickwork that advance one bond per layer,
// tracing a staircase through the bricks. Lines sit every `width` bonds, so
// each subsystem keeps `width` qubits while it slides around the ring. Bond b
// joins qubits b and b + 1 (mod n). Subsystems record the layer-0 split.
inline Partition zigzag_cut(const Architecture& arch, int width,
                            int start_bond = 0) {
  if (arch.kind != ArchKind::Brickwork1D || arch.boundary != Boundary::Periodic)
    throw std::invalid_argument("zig-zag cuts need a periodic 1D brickwork");
  const int n = arch.n_qubits;
  if (width < 2 || width % 2 != 0 || n % width != 0)
    throw std::invalid_argument("zig-zag width must be even and divide n");
  if (start_bond % 2 != 0 || start_bond < 0 || start_bond >= n)
    throw std::invalid_argument("zig-zag must start on an even bond");

  std::vector<CutGate> cuts;
  for (int t = 0; t < arch.depth(); ++t) {
    const Layer& layer = arch.layers[t];
    for (int b0 = start_bond; b0 < start_bond + n; b0 += width) {
      const int a = (b0 + t) % n, b = (a + 1) % n;
      for (std::size_t j = 0; j < layer.size(); ++j)
        if (layer[j] == QubitPair{a, b} || layer[j] == QubitPair{b, a})
          cuts.push_back({t, static_cast<int>(j)});
    }
  }
  std::vector<std::vector<int>> subs;
  for (int b0 = start_bond; b0 < start_bond + n; b0 += width) {
    std::vector<int> s;
    for (int k = 1; k <= width; ++k) s.push_back((b0 + k) % n);
    subs.push_back(std::move(s));
  }
  return make_cut_override(arch, std::move(subs), std::move(cuts));
}

}  // namespace xeblab
