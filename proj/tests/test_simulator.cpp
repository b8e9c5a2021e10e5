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

#include <gtest/gtest.h>

#include <filesystem>

#include "xeblab/simulator.hpp"

namespace xeblab {
namespace {

using Eigen::MatrixXcd;

// Full 2^n matrix of one gate, built index by index.
MatrixXcd embed(int n, const Op& o) {
  const std::size_t dim = std::size_t{1} << n;
  MatrixXcd m = MatrixXcd::Zero(dim, dim);
  for (std::size_t x = 0; x < dim; ++x)
    for (std::size_t y = 0; y < dim; ++y) {
      if (o.kind == Op::Gate1) {
        const std::size_t mask = std::size_t{1} << o.q0;
        if ((x & ~mask) != (y & ~mask)) continue;
        m(x, y) = o.u1((x >> o.q0) & 1, (y >> o.q0) & 1);
      } else {
        const std::size_t mask = (std::size_t{1} << o.q0) | (std::size_t{1} << o.q1);
        if ((x & ~mask) != (y & ~mask)) continue;
        const int lx = 2 * ((x >> o.q0) & 1) + ((x >> o.q1) & 1);
        const int ly = 2 * ((y >> o.q0) & 1) + ((y >> o.q1) & 1);
        m(x, y) = o.u2(lx, ly);
      }
    }
  return m;
}

Mat2 hadamard() {
  Mat2 h;
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

TEST(Pure, EmptyCircuitIsZeroState) {
  const CircuitInstance c = sample_circuit(brickwork_1d(3, 0), GateEnsemble::haar2(), 1);
  const StateVector s = run_pure(c);
  EXPECT_EQ(s.amplitudes[0], cplx(1));
  for (std::size_t i = 1; i < s.amplitudes.size(); ++i) EXPECT_EQ(s.amplitudes[i], cplx(0));
}

TEST(Pure, SingleX) {
  const StateVector s = run_program_pure({1, {Op::gate1(0, pauli(1))}});
  EXPECT_EQ(s.amplitudes[0], cplx(0));
  EXPECT_EQ(s.amplitudes[1], cplx(1));
}

TEST(Pure, CzWithSinglesMatchesMatrixProduct) {
  auto g = stream(3);
  const Mat2 u0 = hadamard(), u1 = haar_unitary<2>(g);
  const Program p{2, {Op::gate1(0, u0), Op::gate1(1, u1), Op::gate2(0, 1, cz_matrix()),
                      Op::gate1(0, pauli(2))}};
  // State index x = b0 + 2 b1, so qubit 1 is the high factor.
  const Mat4 full = kron(Mat2::Identity(), pauli(2)) * cz_matrix() *
                    kron(u1, Mat2::Identity()) * kron(Mat2::Identity(), u0);
  const Eigen::Vector4cd want = full.col(0);
  const StateVector s = run_program_pure(p);
  for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(s.amplitudes[i] - want(i)), 1e-14);
}

TEST(Pure, TwoQubitGateOrdering) {
  auto g = stream(4);
  const Mat4 u = haar_unitary<4>(g);
  for (auto [a, b] : {std::pair{0, 2}, std::pair{2, 0}, std::pair{1, 2}}) {
    const Op o = Op::gate2(a, b, u);
    const Program p{3, {Op::gate1(0, hadamard()), Op::gate1(1, hadamard()), o}};
    const Eigen::VectorXcd want =
        embed(3, o) * embed(3, p.ops[1]) * embed(3, p.ops[0]) *
        Eigen::VectorXcd::Unit(8, 0);
    const StateVector s = run_program_pure(p);
    for (int i = 0; i < 8; ++i) EXPECT_LT(std::abs(s.amplitudes[i] - want(i)), 1e-14);
  }
}

TEST(Pure, LayersEqualFullUnitary) {
  for (auto ens : {GateEnsemble::haar2(), GateEnsemble::fsim(90, 60)}) {
    const CircuitInstance c = sample_circuit(brickwork_1d(6, 5), ens, 21);
    const Program p = compile(c);
    MatrixXcd u = MatrixXcd::Identity(64, 64);
    for (const Op& o : p.ops) u = embed(6, o) * u;
    const StateVector s = run_pure(c);
    for (int i = 0; i < 64; ++i) EXPECT_LT(std::abs(s.amplitudes[i] - u(i, 0)), 1e-10);
  }
}

TEST(Pure, NormPreservedPerOp) {
  const CircuitInstance c = sample_circuit(brickwork_1d(8, 10), GateEnsemble::haar2(), 2);
  StateVector s = StateVector::zero(8);
  for (const Op& o : compile(c).ops) {
    apply_pure(s, o);
    ASSERT_NEAR(s.norm2(), 1.0, 1e-10);
  }
}

TEST(Pure, RejectsChannelsAndCap) {
  EXPECT_THROW(run_program_pure({1, {Op::mdn(0)}}), UnsupportedError);
  EXPECT_THROW(run_program_pure({30, {}}), ResourceError);
}

TEST(Density, NoiselessMatchesPure) {
  const CircuitInstance c = sample_circuit(brickwork_1d(5, 6), GateEnsemble::haar2(), 8);
  const StateVector psi = run_pure(c);
  const DensityMatrix rho = run_density(c, {NoiseKind::Depolarizing, 0.0});
  const DensityMatrix want = DensityMatrix::pure(psi);
  for (std::size_t i = 0; i < rho.entries.size(); ++i)
    EXPECT_LT(std::abs(rho.entries[i] - want.entries[i]), 1e-12);
}

TEST(Density, SingleQubitDepolarizingClosedForm) {
  for (double eps : {0.1, 0.5, 0.75}) {
    const DensityMatrix rho = run_program_density(
        {1, {Op::noise(0, ChannelKind::Depolarizing, eps)}});
    EXPECT_NEAR(rho(0, 0).real(), 1 - 2 * eps / 3, 1e-15);
    EXPECT_NEAR(rho(1, 1).real(), 2 * eps / 3, 1e-15);
  }
  const DensityMatrix mixed = run_program_density(
      {1, {Op::noise(0, ChannelKind::Depolarizing, 0.75)}});
  EXPECT_NEAR(mixed(0, 0).real(), 0.5, 1e-15);
}

TEST(Density, AmplitudeDampingClosedForm) {
  const double g = 0.3;
  const DensityMatrix rho = run_program_density(
      {1, {Op::gate1(0, hadamard()), Op::noise(0, ChannelKind::AmplitudeDamping, g)}});
  EXPECT_NEAR(rho(1, 1).real(), 0.5 * (1 - g), 1e-15);
  EXPECT_NEAR(rho(0, 1).real(), 0.5 * std::sqrt(1 - g), 1e-15);
}

TEST(Density, TracePreservedAfterEveryOp) {
  const CircuitInstance c = sample_circuit(brickwork_1d(4, 6), GateEnsemble::haar2(), 5);
  for (auto kind : {NoiseKind::Depolarizing, NoiseKind::AmplitudeDamping}) {
    const Program p = compile(c, NoiseModel{kind, 0.05});
    DensityMatrix rho = DensityMatrix::pure(StateVector::zero(4));
    for (const Op& o : p.ops) {
      apply_density(rho, o);
      ASSERT_NEAR(rho.trace().real(), 1.0, 1e-12);
      ASSERT_NEAR(rho.trace().imag(), 0.0, 1e-12);
    }
  }
}

TEST(Density, MdnOnEveryQubitIsMaximallyMixed) {
  const CircuitInstance c = sample_circuit(brickwork_1d(4, 4), GateEnsemble::haar2(), 5);
  Program p = compile(c);
  for (int q = 0; q < 4; ++q) p.ops.push_back(Op::mdn(q));
  const auto d = BitstringDistribution::from_density(run_program_density(p));
  for (double x : d.probabilities) EXPECT_NEAR(x, 1.0 / 16, 1e-14);
}

TEST(Density, Cap) {
  EXPECT_THROW(run_program_density({13, {}}), ResourceError);
}

TEST(Fidelity, Cases) {
  const CircuitInstance c = sample_circuit(brickwork_1d(4, 6), GateEnsemble::haar2(), 9);
  const StateVector psi = run_pure(c);
  EXPECT_NEAR(fidelity(psi, DensityMatrix::pure(psi)), 1.0, 1e-14);
  EXPECT_NEAR(fidelity(psi, psi), 1.0, 1e-14);

  DensityMatrix mixed{4, std::vector<cplx>(256, 0.0)};
  for (int i = 0; i < 16; ++i) mixed.entries[i * 16 + i] = 1.0 / 16;
  EXPECT_NEAR(fidelity(psi, mixed), 1.0 / 16, 1e-15);

  // rho = sum_k lambda_k |phi_k><phi_k| from a random unitary's columns.
  auto g = stream(10);
  Eigen::MatrixXcd z(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int cc = 0; cc < 16; ++cc) z(r, cc) = cplx(normal01(g), normal01(g));
  const Eigen::MatrixXcd u = Eigen::HouseholderQR<Eigen::MatrixXcd>(z).householderQ();
  Eigen::VectorXd lam(16);
  for (int k = 0; k < 16; ++k) lam(k) = uniform01(g);
  lam /= lam.sum();
  const Eigen::MatrixXcd rho = u * lam.asDiagonal() * u.adjoint();
  DensityMatrix dm{4, std::vector<cplx>(256)};
  for (int r = 0; r < 16; ++r)
    for (int cc = 0; cc < 16; ++cc) dm.entries[r * 16 + cc] = rho(r, cc);
  const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(psi.amplitudes.data(), 16);
  EXPECT_NEAR(fidelity(psi, dm), (v.adjoint() * rho * v)(0, 0).real(), 1e-14);
}

TEST(Trajectories, NoiselessAreExact) {
  const CircuitInstance c = sample_circuit(brickwork_1d(4, 4), GateEnsemble::haar2(), 3);
  const TrajectoryResult r = run_trajectories(c, {NoiseKind::Depolarizing, 0.0}, 50, 1);
  EXPECT_NEAR(r.fidelity, 1.0, 1e-12);
  const auto p = BitstringDistribution::from_state(run_pure(c));
  for (std::size_t x = 0; x < p.size(); ++x)
    EXPECT_NEAR(r.distribution[x], p[x], 1e-14);
}

TEST(Trajectories, AgreeWithDensity) {
  const CircuitInstance c = sample_circuit(brickwork_1d(6, 6), GateEnsemble::haar2(), 17);
  const NoiseModel noise{NoiseKind::Depolarizing, 0.02};
  const TrajectoryResult r = run_trajectories(c, noise, 10000, 4);
  const DensityMatrix rho = run_density(c, noise);
  EXPECT_LT(std::abs(r.fidelity - fidelity(run_pure(c), rho)), 3 * r.fidelity_se);
  const auto q = BitstringDistribution::from_density(rho);
  int over3 = 0;
  for (std::size_t x = 0; x < q.size(); ++x) {
    const double z = std::abs(r.distribution[x] - q[x]) / r.distribution_se[x];
    EXPECT_LT(z, 5.0) << "x = " << x;
    over3 += z > 3;
  }
  EXPECT_LE(over3, 3);
}

// Unbiasedness over 20 circuits: per-circuit fidelity z-scores.
TEST(Trajectories, UnbiasedAcrossCircuits) {
  const NoiseModel noise{NoiseKind::Depolarizing, 0.03};
  int over3 = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const CircuitInstance c = sample_circuit(brickwork_1d(4, 5), GateEnsemble::haar2(), s);
    const TrajectoryResult r = run_trajectories(c, noise, 4000, 100 + s);
    const double f = fidelity(run_pure(c), run_density(c, noise));
    over3 += std::abs(r.fidelity - f) > 3 * r.fidelity_se;
  }
  EXPECT_LE(over3, 1);
}

TEST(Trajectories, FidelityDecreasesWithNoise) {
  const CircuitInstance c = sample_circuit(brickwork_1d(5, 6), GateEnsemble::haar2(), 6);
  double prev = 2, prev_se = 0;
  for (double eps : {0.0, 0.01, 0.02, 0.05}) {
    const TrajectoryResult r = run_trajectories(c, {NoiseKind::Depolarizing, eps}, 4000, 9);
    EXPECT_LT(r.fidelity, prev + 3 * (r.fidelity_se + prev_se)) << eps;
    prev = r.fidelity;
    prev_se = r.fidelity_se;
  }
  EXPECT_LT(prev, 0.9);
}

TEST(Trajectories, AmplitudeDampingUnsupported) {
  const CircuitInstance c = sample_circuit(brickwork_1d(2, 1), GateEnsemble::haar2(), 1);
  EXPECT_THROW(run_trajectories(c, {NoiseKind::AmplitudeDamping, 0.1}, 10, 1),
               UnsupportedError);
}

TEST(Sampling, PointMass) {
  BitstringDistribution p{3, std::vector<double>(8, 0.0)};
  p.probabilities[5] = 1;
  for (Bitstring x : sample_bitstrings(p, 100, 1)) EXPECT_EQ(x, 5u);
}

TEST(Sampling, UniformFrequencies) {
  const std::size_t m = 100000;
  const auto xs = sample_bitstrings(BitstringDistribution::uniform(2), m, 2);
  std::vector<double> count(4, 0);
  for (Bitstring x : xs) count[x] += 1;
  const double sigma = std::sqrt(0.25 * 0.75 / m);
  for (double c : count) EXPECT_LT(std::abs(c / m - 0.25), 5 * sigma);
}

TEST(Sampling, Deterministic) {
  const auto p = BitstringDistribution::from_state(
      run_pure(sample_circuit(brickwork_1d(4, 4), GateEnsemble::haar2(), 1)));
  EXPECT_EQ(sample_bitstrings(p, 500, 3), sample_bitstrings(p, 500, 3));
  EXPECT_NE(sample_bitstrings(p, 500, 3), sample_bitstrings(p, 500, 4));
}

TEST(PorterThomas, TrivialMoments) {
  const auto p = BitstringDistribution::from_state(
      run_pure(sample_circuit(brickwork_1d(4, 4), GateEnsemble::haar2(), 1)));
  EXPECT_NEAR(pt_moment_ratio(p, 1), 1.0, 1e-14);
  EXPECT_NEAR(pt_moment_ratio(BitstringDistribution::uniform(5), 2), 0.5, 1e-15);
}

// Depth counts brickwork layers; at N = 12 the fourth moment is still 12%
// high at d = 20 and settles by d = 40.
TEST(PorterThomas, DeepCircuitsScramble) {
  for (int k : {2, 3, 4}) {
    double acc = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto p = BitstringDistribution::from_state(
          run_pure(sample_circuit(brickwork_1d(12, 40), GateEnsemble::haar2(), s)));
      acc += pt_moment_ratio(p, k);
    }
    EXPECT_NEAR(acc / 50, 1.0, 0.05) << "k = " << k;
  }
}

TEST(Export, BinaryRoundTrip) {
  const auto p = BitstringDistribution::from_state(
      run_pure(sample_circuit(brickwork_1d(5, 4), GateEnsemble::haar2(), 1)));
  const auto path = (std::filesystem::temp_directory_path() / "xeblab_dist.bin").string();
  write_distribution_binary(p, path);
  EXPECT_EQ(read_distribution_binary(path, 5).probabilities, p.probabilities);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace xeblab
