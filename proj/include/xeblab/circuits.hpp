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
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xeblab/common.hpp"

namespace xeblab {

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

enum class ArchKind { Brickwork1D, Grid2D, Custom };
enum class Boundary { Open, Periodic };

using QubitPair = std::pair<int, int>;
using Layer = std::vector<QubitPair>;

struct Architecture {
  int n_qubits = 0;
  std::vector<Layer> layers;
  ArchKind kind = ArchKind::Custom;
  Boundary boundary = Boundary::Open;

  int depth() const { return static_cast<int>(layers.size()); }

  // Throws std::invalid_argument naming the offending layer and pair.
  void validate() const {
    if (n_qubits < 1) throw std::invalid_argument("n_qubits must be >= 1");
    for (std::size_t t = 0; t < layers.size(); ++t) {
      std::vector<char> used(n_qubits, 0);
      for (std::size_t j = 0; j < layers[t].size(); ++j) {
        const auto [a, b] = layers[t][j];
        auto where = [&] {
          std::ostringstream os;
          os << "layer " << t << ", pair " << j << " (" << a << "," << b
             << ")";
          return os.str();
        };
        if (a < 0 || b < 0 || a >= n_qubits || b >= n_qubits)
          throw std::invalid_argument("qubit index out of range at " + where());
        if (a == b)
          throw std::invalid_argument("pair acts twice on one qubit at " +
                                      where());
        if (used[a] || used[b])
          throw std::invalid_argument("overlapping pairs at " + where());
        used[a] = used[b] = 1;
      }
    }
  }

  bool operator==(const Architecture& o) const {
    return n_qubits == o.n_qubits && layers == o.layers;
  }
};

inline Architecture brickwork_1d(int n, int depth,
                                 Boundary boundary = Boundary::Open) {
  if (n < 2 || depth < 0)
    throw std::invalid_argument("brickwork needs n >= 2 and depth >= 0");
  if (boundary == Boundary::Periodic && n % 2 != 0)
    throw std::invalid_argument("periodic brickwork needs an even n");
  Architecture arch{n, {}, ArchKind::Brickwork1D, boundary};
  for (int t = 0; t < depth; ++t) {
    Layer layer;
    for (int a = t % 2; a + 1 < n; a += 2) layer.emplace_back(a, a + 1);
    if (t % 2 == 1 && boundary == Boundary::Periodic && n > 2)
      layer.emplace_back(n - 1, 0);
    arch.layers.push_back(std::move(layer));
  }
  return arch;
}

// L rows by L+1 columns, qubit index r * (L + 1) + c. Layers cycle through
// horizontal (even c), horizontal (odd c), vertical (even r), vertical (odd r).
inline Architecture grid_2d(int L, int depth) {
  if (L < 1 || depth < 0)
    throw std::invalid_argument("grid needs L >= 1 and depth >= 0");
  const int rows = L, cols = L + 1;
  Architecture arch{rows * cols, {}, ArchKind::Grid2D, Boundary::Open};
  auto q = [cols](int r, int c) { return r * cols + c; };
  for (int t = 0; t < depth; ++t) {
    Layer layer;
    const int orient = t % 4;
    if (orient < 2) {
      for (int r = 0; r < rows; ++r)
        for (int c = orient; c + 1 < cols; c += 2)
          layer.emplace_back(q(r, c), q(r, c + 1));
    } else {
      for (int r = orient - 2; r + 1 < rows; r += 2)
        for (int c = 0; c < cols; ++c) layer.emplace_back(q(r, c), q(r + 1, c));
    }
    arch.layers.push_back(std::move(layer));
  }
  return arch;
}

inline int grid_side_for(int n_qubits) {
  for (int L = 1; L * (L + 1) <= n_qubits; ++L)
    if (L * (L + 1) == n_qubits) return L;
  throw std::invalid_argument("grid-2d needs n_qubits = L(L+1); got " +
                              std::to_string(n_qubits));
}

inline Architecture build_architecture(ArchKind kind, int n_qubits, int depth,
                                       Boundary boundary = Boundary::Open) {
  if (n_qubits < 2 || depth < 1)
    throw std::invalid_argument("need n_qubits >= 2 and depth >= 1");
  switch (kind) {
    case ArchKind::Brickwork1D:
      return brickwork_1d(n_qubits, depth, boundary);
    case ArchKind::Grid2D:
      return grid_2d(grid_side_for(n_qubits), depth);
    case ArchKind::Custom:
      break;
  }
  throw std::invalid_argument("custom architectures are loaded from files");
}

inline nlohmann::json architecture_to_json(const Architecture& arch) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : arch.layers) {
    nlohmann::json l = nlohmann::json::array();
    for (auto [a, b] : layer) l.push_back({a, b});
    layers.push_back(l);
  }
  return {{"n_qubits", arch.n_qubits}, {"layers", layers}};
}

inline Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture arch;
  arch.n_qubits = j.at("n_qubits").get<int>();
  for (const auto& l : j.at("layers")) {
    Layer layer;
    for (const auto& p : l) {
      if (!p.is_array() || p.size() != 2)
        throw std::invalid_argument("pair must be a 2-element array in layer " +
                                    std::to_string(arch.layers.size()));
      layer.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    arch.layers.push_back(std::move(layer));
  }
  arch.validate();
  return arch;
}

inline Architecture load_architecture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return architecture_from_json(nlohmann::json::parse(in));
}

inline void save_architecture(const Architecture& arch,
                              const std::string& path) {
  std::ofstream out(path);
  out << architecture_to_json(arch).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Gates

inline Mat2 pauli(int mu) {
  const cplx i(0, 1);
  Mat2 m;
  switch (mu) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, -i, i, 0; break;
    default: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline Mat4 fsim_matrix(double theta_deg, double phi_deg) {
  const double th = theta_deg * kPi / 180.0, ph = phi_deg * kPi / 180.0;
  const cplx i(0, 1);
  Mat4 m = Mat4::Zero();
  m(0, 0) = 1;
  m(1, 1) = m(2, 2) = std::cos(th);
  m(1, 2) = m(2, 1) = -i * std::sin(th);
  m(3, 3) = std::exp(-i * ph);
  return m;
}

inline Mat4 cz_matrix() {
  Mat4 m = Mat4::Identity();
  m(3, 3) = -1;
  return m;
}

inline Mat4 swap_matrix() {
  Mat4 m = Mat4::Zero();
  m(0, 0) = m(1, 2) = m(2, 1) = m(3, 3) = 1;
  return m;
}

inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = a(r / 2, c / 2) * b(r % 2, c % 2);
  return m;
}

// Haar-random U(n): QR of a complex Ginibre matrix with the phases of R's
// diagonal moved into Q.
template <int Dim>
Eigen::Matrix<cplx, Dim, Dim> haar_unitary(std::mt19937_64& g) {
  using M = Eigen::Matrix<cplx, Dim, Dim>;
  M z;
  const double s = 1.0 / std::sqrt(2.0);
  for (int r = 0; r < Dim; ++r)
    for (int c = 0; c < Dim; ++c) z(r, c) = cplx(normal01(g), normal01(g)) * s;
  Eigen::HouseholderQR<M> qr(z);
  M q = qr.householderQ();
  M rmat = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int c = 0; c < Dim; ++c) {
    const cplx d = rmat(c, c);
    const double a = std::abs(d);
    q.col(c) *= (a > 0 ? d / a : cplx(1));
  }
  return q;
}

template <typename M>
bool is_unitary(const M& u, double tol = 1e-12) {
  return (u.adjoint() * u - M::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

// sqrt(V) for V in {X, Y, W}, W = (X + Y)/sqrt(2): exp(-i pi V / 4).
inline Mat2 sqrt_pauli_like(int which) {
  const cplx i(0, 1);
  Mat2 v;
  if (which == 0) v = pauli(1);
  else if (which == 1) v = pauli(2);
  else v = (pauli(1) + pauli(2)) / std::sqrt(2.0);
  return (Mat2::Identity() - i * v) / std::sqrt(2.0);
}

inline Mat2 z_rotation(double theta) {
  Mat2 m = Mat2::Zero();
  m(0, 0) = 1;
  m(1, 1) = std::exp(cplx(0, theta));
  return m;
}

// The 12 single-qubit gates Z(z1) sqrt(V) Z(z2), z1, z2 in {0, pi}, in the
// order (V, z1, z2).
inline std::vector<Mat2> discrete_single_qubit_set() {
  std::vector<Mat2> out;
  for (int v = 0; v < 3; ++v)
    for (double z1 : {0.0, kPi})
      for (double z2 : {0.0, kPi})
        out.push_back(z_rotation(z1) * sqrt_pauli_like(v) * z_rotation(z2));
  return out;
}

// ---------------------------------------------------------------------------
// Ensembles and instances

enum class EnsembleKind { CZ, Haar2, FSim, DiscreteFSim };
enum class ZMode { Continuous, Binary };

struct GateEnsemble {
  EnsembleKind kind = EnsembleKind::Haar2;
  double theta = 90.0;
  double phi = 60.0;
  ZMode z_mode = ZMode::Continuous;

  static GateEnsemble cz() { return {EnsembleKind::CZ}; }
  static GateEnsemble haar2() { return {EnsembleKind::Haar2}; }
  static GateEnsemble fsim(double th, double ph) {
    return {EnsembleKind::FSim, th, ph};
  }
  static GateEnsemble discrete_fsim(double th, double ph, ZMode z) {
    return {EnsembleKind::DiscreteFSim, th, ph, z};
  }

  bool dressed() const { return kind != EnsembleKind::Haar2; }

  // Fixed entangler for the dressed ensembles.
  Mat4 entangler() const {
    if (kind == EnsembleKind::CZ) return cz_matrix();
    return fsim_matrix(theta, phi);
  }

  std::string name() const {
    switch (kind) {
      case EnsembleKind::CZ: return "cz";
      case EnsembleKind::Haar2: return "haar";
      case EnsembleKind::FSim: return "fsim";
      case EnsembleKind::DiscreteFSim: return "discrete-fsim";
    }
    return "";
  }

  void validate() const {
    if (theta < 0 || theta >= 360 || phi < 0 || phi >= 360)
      throw std::invalid_argument("fSim angles must lie in [0, 360)");
  }
};

struct CircuitInstance {
  Architecture arch;
  GateEnsemble ensemble;
  std::uint64_t seed = 0;
  // two_qubit_gates[t][j] acts on arch.layers[t][j]; basis index 2*a + b.
  std::vector<std::vector<Mat4>> two_qubit_gates;
  // single_qubit_gates[t][q], t = 0..depth; layer t precedes entangling
  // layer t and layer depth is applied before measurement. Empty for Haar2.
  std::vector<std::vector<Mat2>> single_qubit_gates;
  // V choice (0: sqrt X, 1: sqrt Y, 2: sqrt W) per dressing slot, discrete only.
  std::vector<std::vector<int>> v_choice;

  int n_qubits() const { return arch.n_qubits; }
  int depth() const { return arch.depth(); }
  bool dressed() const { return !single_qubit_gates.empty(); }
};

namespace stream_tag {
inline constexpr std::uint64_t kTwoQubit = 1, kSingle = 2, kVSequence = 3;
}

inline CircuitInstance sample_circuit(const Architecture& arch,
                                      const GateEnsemble& ens,
                                      std::uint64_t seed) {
  arch.validate();
  ens.validate();
  CircuitInstance c{arch, ens, seed, {}, {}, {}};
  const int d = arch.depth(), n = arch.n_qubits;
  c.two_qubit_gates.resize(d);
  for (int t = 0; t < d; ++t) {
    for (auto [a, b] : arch.layers[t]) {
      if (ens.kind == EnsembleKind::Haar2) {
        auto g = stream(seed, stream_tag::kTwoQubit, t, std::min(a, b));
        c.two_qubit_gates[t].push_back(haar_unitary<4>(g));
      } else {
        c.two_qubit_gates[t].push_back(ens.entangler());
      }
    }
  }
  if (!ens.dressed()) return c;

  c.single_qubit_gates.assign(d + 1, std::vector<Mat2>(n));
  if (ens.kind != EnsembleKind::DiscreteFSim) {
    for (int t = 0; t <= d; ++t)
      for (int q = 0; q < n; ++q) {
        auto g = stream(seed, stream_tag::kSingle, t, q);
        c.single_qubit_gates[t][q] = haar_unitary<2>(g);
      }
    return c;
  }

  c.v_choice.assign(d + 1, std::vector<int>(n));
  for (int q = 0; q < n; ++q) {
    auto gv = stream(seed, stream_tag::kVSequence, q);
    int prev = -1;
    for (int t = 0; t <= d; ++t) {
      int v;
      if (prev < 0) {
        v = static_cast<int>(gv() % 3);
      } else {
        v = static_cast<int>(gv() % 2);
        if (v >= prev) ++v;
      }
      c.v_choice[t][q] = prev = v;
    }
  }
  for (int t = 0; t <= d; ++t)
    for (int q = 0; q < n; ++q) {
      auto g = stream(seed, stream_tag::kSingle, t, q);
      double z1, z2;
      if (ens.z_mode == ZMode::Binary) {
        z1 = (g() & 1) ? kPi : 0.0;
        z2 = (g() & 1) ? kPi : 0.0;
      } else {
        z1 = 2 * kPi * uniform01(g);
        z2 = 2 * kPi * uniform01(g);
      }
      c.single_qubit_gates[t][q] =
          z_rotation(z1) * sqrt_pauli_like(c.v_choice[t][q]) * z_rotation(z2);
    }
  return c;
}

}  // namespace xeblab
