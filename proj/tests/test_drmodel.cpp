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

#include "xeblab/drmodel.hpp"
#include "xeblab/ensemble.hpp"

namespace xeblab::dr {
namespace {

void expect_params(const DRParams& p, double D, double R, double tol = 1e-12) {
  EXPECT_NEAR(p.D, D, tol);
  EXPECT_NEAR(p.R, R, tol);
}

// Exact stationary chi of the ideal process: the vacuum keeps 2^-N and the
// rest relaxes to (1/4, 3/4) per site restricted to non-vacuum states.
double stationary_xeb(int n) {
  const double t = std::ldexp(1.0, n);
  return (t - 1) / (t + 1);
}

TEST(ExtractDR, FixedGates) {
  expect_params(extract_DR(cz_matrix()), 2.0 / 3, 2.0 / 3);
  expect_params(extract_DR(swap_matrix()), 1, 0);
  expect_params(extract_DR(Mat4::Identity()), 0, 0);
}

// fSim(90, phi) is SWAP times a controlled phase of angle pi - phi up to
// single-qubit Z phases, so D = 1 and R = (2/3) cos^2(phi / 2).
TEST(ExtractDR, FsimFamilyClosedForm) {
  for (double phi : {0.0, 30.0, 60.0, 90.0, 150.0, 180.0, 270.0}) {
    const double r = (1 + std::cos(phi * kPi / 180)) / 3;
    expect_params(extract_DR(fsim_matrix(90, phi)), 1, r);
  }
  expect_params(extract_DR(fsim_matrix(90, 30)), 1, 1.0 / 3 + std::sqrt(3.0) / 6);
}

TEST(ExtractDR, InvariantUnderLocalUnitaries) {
  auto g = stream(1);
  const Mat4 base = haar_unitary<4>(g);
  const DRParams p = extract_DR(base);
  for (int k = 0; k < 5; ++k) {
    const Mat4 a = kron(haar_unitary<2>(g), haar_unitary<2>(g));
    const Mat4 b = kron(haar_unitary<2>(g), haar_unitary<2>(g));
    expect_params(extract_DR(a * base * b), p.D, p.R, 1e-10);
  }
}

TEST(ExtractDR, RejectsNonUnitary) {
  EXPECT_THROW(extract_DR(2.0 * Mat4::Identity()), std::invalid_argument);
}

TEST(ExtractDR, RandomGatesStayInRange) {
  for (std::size_t i = 0; i < 10000; ++i) {
    auto g = stream(2, i);
    const DRParams p = extract_DR(haar_unitary<4>(g));
    ASSERT_GE(p.D - p.R, -1e-9);
    ASSERT_LE(p.R, 2.0 / 3 + 1e-9);
    ASSERT_LE(p.D, 1 + 1e-12);
  }
}

TEST(Ensemble, HaarAnalyticAndMonteCarlo) {
  const EnsembleDR e = dr_for_ensemble(GateEnsemble::haar2(), 10000, 3);
  expect_params(e.params, 0.8, 0.6);
  ASSERT_TRUE(e.mc.has_value());
  EXPECT_LT(std::abs(e.mc->D - 0.8), 5 * e.mc_D_se);
  EXPECT_LT(std::abs(e.mc->R - 0.6), 5 * e.mc_R_se);
}

TEST(Ensemble, ExactlyOneFsimStarCandidate) {
  int hits = 0;
  for (double phi : {0.0, 180.0}) {
    const DRParams p = dr_for_ensemble(GateEnsemble::fsim(90, phi)).params;
    hits += std::abs(p.D - 1) < 1e-12 && std::abs(p.R - 2.0 / 3) < 1e-12;
  }
  EXPECT_EQ(hits, 1);
  expect_params(dr_for_ensemble(GateEnsemble::fsim(90, 0)).params, 1, 2.0 / 3);
}

TEST(BuildT, Structure) {
  EXPECT_TRUE(build_T({0, 0}).isApprox(TransferMatrix4::Identity()));
  const TransferMatrix4 t = build_T({0.8, 0.6});
  EXPECT_NEAR(t(kIO, kIO), 0.2, 1e-15);
  EXPECT_NEAR(t(kOI, kIO), 0.2, 1e-15);
  EXPECT_NEAR(t(kIO, kOO), 0.2, 1e-15);
  EXPECT_NEAR(t(kOO, kOO), 0.6, 1e-15);
  for (double D : {0.0, 0.3, 2.0 / 3, 1.0})
    for (double R : {0.0, 0.2, 2.0 / 3}) {
      if (R > D) continue;
      const TransferMatrix4 m = build_T({D, R});
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(m.col(c).sum(), 1.0, 1e-15);
      EXPECT_EQ(m.row(0), Eigen::RowVector4d(1, 0, 0, 0));
      EXPECT_EQ(m.col(0), Eigen::Vector4d(1, 0, 0, 0));
    }
}

TEST(BuildT, MatchesGateTransferMatrix) {
  for (const Mat4& g : {cz_matrix(), fsim_matrix(90, 60), swap_matrix()}) {
    const TransferMatrix4 direct = transfer_matrix(g);
    EXPECT_LT((direct - build_T(extract_DR(g))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Defects, SiteFactors) {
  const Architecture a = brickwork_1d(4, 3);
  const DefectMap dep = attach_defects(a, NoiseModel{NoiseKind::Depolarizing, 0.03}, nullptr);
  const DefectMap ad = attach_defects(a, NoiseModel{NoiseKind::AmplitudeDamping, 0.03}, nullptr);
  const DefectMap none = attach_defects(a, NoiseModel{NoiseKind::Depolarizing, 0.0}, nullptr);
  for (int t = 0; t < 3; ++t)
    for (int q = 0; q < 4; ++q) {
      EXPECT_NEAR(dep.at(t, q), 1 - 0.04, 1e-15);
      EXPECT_NEAR(ad.at(t, q), 1 - 0.02, 1e-15);
      EXPECT_EQ(none.at(t, q), 1.0);
    }
  const Partition part = make_cut(a, halves(4));
  const DefectMap cut = attach_defects(a, std::nullopt, &part);
  EXPECT_EQ(cut.at(1, 1), 0.0);
  EXPECT_EQ(cut.at(1, 2), 0.0);
  EXPECT_EQ(cut.at(0, 1), 1.0);
  EXPECT_EQ(cut.at(1, 0), 1.0);
}

TEST(Propagate, DepthZeroIsUniform) {
  const Architecture a = brickwork_1d(6, 0);
  const ParticleDistribution p = propagate_exact(a, DRParams{0.8, 0.6}, DefectMap::identity(0, 6));
  for (double w : p.weights) EXPECT_EQ(w, 1.0 / 64);
  EXPECT_NEAR(evaluate_xeb(p), std::pow(4.0 / 3, 6) - 1, 1e-12);
  EXPECT_NEAR(evaluate_fidelity(p), 1.0, 1e-15);
}

TEST(Propagate, WeightConservedEveryLayer) {
  for (auto arch : {brickwork_1d(8, 12), grid_2d(2, 12), brickwork_1d(8, 12, Boundary::Periodic)}) {
    ParticleDistribution p = initial_distribution(arch.n_qubits);
    const TransferMatrix4 t = build_T({0.8, 0.6});
    const DefectMap none = DefectMap::identity(arch.depth(), arch.n_qubits);
    for (int l = 0; l < arch.depth(); ++l) {
      apply_layer(p, arch.layers[l], t, none, l);
      ASSERT_NEAR(evaluate_fidelity(p), 1.0, 1e-10);
      ASSERT_GE(*std::min_element(p.weights.begin(), p.weights.end()), -1e-12);
    }
  }
}

// The large-depth value does not depend on (D, R).
TEST(Propagate, SteadyStateIsGateIndependent) {
  const Architecture a = brickwork_1d(10, 200, Boundary::Periodic);
  const DefectMap none = DefectMap::identity(200, 10);
  for (auto ens : {GateEnsemble::cz(), GateEnsemble::haar2(), GateEnsemble::fsim(90, 30)}) {
    const ParticleDistribution p = propagate_exact(a, dr_for_ensemble(ens).params, none);
    EXPECT_NEAR(evaluate_xeb(p), stationary_xeb(10), 1e-6) << ens.name();
    EXPECT_NEAR(evaluate_fidelity(p), 1.0, 1e-10);
  }
}

TEST(Propagate, ParticleCountNearBinomial) {
  const Architecture a = brickwork_1d(10, 200, Boundary::Periodic);
  const ParticleDistribution p =
      propagate_exact(a, DRParams{0.8, 0.6}, DefectMap::identity(200, 10));
  const auto m = particle_count_marginal(p);
  // Binomial(10, 3/4) away from k = 0, whose weight the vacuum pins at 2^-10.
  const double vac = std::ldexp(1.0, -10), b0 = std::pow(0.25, 10);
  for (int k = 1; k <= 10; ++k) {
    const double binom = std::tgamma(11.0) / (std::tgamma(k + 1.0) * std::tgamma(11.0 - k)) *
                         std::pow(0.75, k) * std::pow(0.25, 10 - k);
    EXPECT_NEAR(m[k], binom * (1 - vac) / (1 - b0), 1e-9) << k;
  }
  EXPECT_NEAR(m[0], vac, 1e-15);
}

TEST(Propagate, Cap) {
  const Architecture a = brickwork_1d(30, 1);
  EXPECT_THROW(propagate_exact(a, DRParams{}, DefectMap::identity(1, 30)), ResourceError);
}

TEST(Evaluate, PartitionedIsProduct) {
  const Architecture a = brickwork_1d(12, 12);
  const Partition part = make_cut(a, contiguous_blocks({5, 7}));
  const DefectMap defects = attach_defects(a, std::nullopt, &part);
  const TransferMatrix4 t = build_T({0.8, 0.6});
  const ParticleDistribution whole = propagate_exact(a, t, defects);
  const FactorizedDistribution f = propagate_factorized(a, t, defects, part.subsystems);
  double prod_x = 1, prod_f = 1;
  for (const auto& p : f.parts) {
    prod_x *= 1 + evaluate_xeb(p);
    prod_f *= evaluate_fidelity(p);
  }
  EXPECT_NEAR(1 + evaluate_xeb(whole), prod_x, 1e-12);
  EXPECT_NEAR(evaluate_fidelity(whole), prod_f, 1e-12);
  EXPECT_NEAR(evaluate(f, Observable::XEB), evaluate_xeb(whole), 1e-12);
}

TEST(Evaluate, FactorizedNeedsWalls) {
  const Architecture a = brickwork_1d(6, 4);
  EXPECT_THROW(propagate_factorized(a, build_T({0.8, 0.6}), DefectMap::identity(4, 6), halves(6)),
               std::invalid_argument);
}

TEST(Evaluate, TinyValuesSurvive) {
  const Architecture a = brickwork_1d(8, 60);
  const ParticleDistribution p = propagate_exact(
      a, DRParams{0.8, 0.6}, attach_defects(a, NoiseModel{NoiseKind::Depolarizing, 0.2}, nullptr));
  const double x = evaluate_xeb(p);
  EXPECT_GT(x, 0.0);
  EXPECT_LT(x, 1e-6);
}

TEST(MonteCarlo, IdealMatchesExact) {
  const Architecture a = brickwork_1d(10, 40);
  const TransferMatrix4 t = build_T({0.8, 0.6});
  const DefectMap none = DefectMap::identity(40, 10);
  const double exact = evaluate_xeb(propagate_exact(a, t, none));
  const MCResult r = propagate_mc(a, t, none, 1000000, 1);
  EXPECT_LT(std::abs(r.xeb - exact), 3 * r.xeb_se) << r.xeb << " vs " << exact;
  EXPECT_NEAR(r.fidelity, 1.0, 1e-12);
}

TEST(MonteCarlo, NoisyMatchesExact) {
  const Architecture a = brickwork_1d(8, 8);
  const TransferMatrix4 t = build_T({0.8, 0.6});
  const DefectMap noisy = attach_defects(a, NoiseModel{NoiseKind::Depolarizing, 0.05}, nullptr);
  const ParticleDistribution p = propagate_exact(a, t, noisy);
  const MCResult r = propagate_mc(a, t, noisy, 200000, 2);
  EXPECT_LT(std::abs(r.xeb - evaluate_xeb(p)), 3 * r.xeb_se);
  EXPECT_LT(std::abs(r.fidelity - evaluate_fidelity(p)), 3 * r.fidelity_se);
}

TEST(MonteCarlo, NoisyFidelityMatchesCircuits) {
  const Architecture a = brickwork_1d(8, 8);
  const NoiseModel noise{NoiseKind::Depolarizing, 0.02};
  const MCResult r =
      propagate_mc(a, build_T({0.8, 0.6}), attach_defects(a, noise, nullptr), 200000, 3);
  const MetricsStat s = summarize(map_circuits<CircuitMetrics>(
      a, GateEnsemble::haar2(), 2000, 4,
      [&](const CircuitInstance& c) { return noisy_metrics(c, noise); }));
  const double se = std::hypot(r.fidelity_se, s.fidelity.standard_error);
  EXPECT_LT(std::abs(r.fidelity - s.fidelity.mean), 3 * se)
      << r.fidelity << " vs " << s.fidelity.mean;
}

TEST(MonteCarlo, WallMatchesFactorized) {
  const Architecture a = brickwork_1d(12, 10);
  const Partition part = make_cut(a, halves(12));
  const DefectMap defects = attach_defects(a, std::nullopt, &part);
  const TransferMatrix4 t = build_T({0.8, 0.6});
  const double exact =
      evaluate(propagate_factorized(a, t, defects, part.subsystems), Observable::XEB);
  const MCResult r = propagate_mc(a, t, defects, 400000, 5);
  EXPECT_LT(std::abs(r.xeb - exact), 3 * r.xeb_se) << r.xeb << " vs " << exact;
}

TEST(MonteCarlo, Deterministic) {
  const Architecture a = brickwork_1d(6, 6);
  const TransferMatrix4 t = build_T({0.8, 0.6});
  const DefectMap none = DefectMap::identity(6, 6);
  EXPECT_EQ(propagate_mc(a, t, none, 1000, 9).xeb, propagate_mc(a, t, none, 1000, 9).xeb);
}

TEST(Chain, MatchesDensePropagation) {
  const TransferMatrix4 t = build_T({0.8, 0.6});
  for (int n : {2, 3, 7, 10})
    for (int d : {1, 4, 7}) {
      const Architecture a = brickwork_1d(n, d);
      DefectMap m = DefectMap::identity(d, n);
      auto rng = stream(n, d, 0, 0);
      for (double& x : m.omega) x = uniform01(rng);
      const ParticleDistribution p = propagate_exact(a, t, m);
      const ChainResult c = contract_chain(a, t, m);
      EXPECT_NEAR(c.xeb, evaluate_xeb(p), 1e-12 * std::abs(evaluate_xeb(p))) << n << " " << d;
      EXPECT_NEAR(c.fidelity, evaluate_fidelity(p), 1e-12 * evaluate_fidelity(p));
    }
}

TEST(Chain, WallMatchesFactorizedBeyondDenseCap) {
  const Architecture a = brickwork_1d(36, 12);
  const Partition part = make_cut(a, halves(36));
  const TransferMatrix4 t = build_T({0.8, 0.6});
  const DefectMap m = attach_defects(a, std::nullopt, &part);
  const ChainResult c = contract_chain(a, t, m);
  const FactorizedDistribution f = propagate_factorized(a, t, m, part.subsystems);
  EXPECT_NEAR(c.xeb / evaluate(f, Observable::XEB), 1.0, 1e-10);
  EXPECT_NEAR(c.fidelity / evaluate(f, Observable::Fidelity), 1.0, 1e-10);
}

TEST(Chain, RejectsRingsAndDeepCircuits) {
  const TransferMatrix4 t = build_T({0.8, 0.6});
  const Architecture ring = brickwork_1d(8, 4, Boundary::Periodic);
  EXPECT_THROW(contract_chain(ring, t, DefectMap::identity(4, 8)), UnsupportedError);
  const Architecture deep = brickwork_1d(4, kChainDepthCap + 1);
  EXPECT_THROW(contract_chain(deep, t, DefectMap::identity(deep.depth(), 4)), ResourceError);
}

TEST(WeakNoise, FitRecoversProductForm) {
  // A product of (a/4, 3ab/4) per site is recovered exactly.
  const double alpha = 0.9, beta = 0.8;
  ParticleDistribution p{5, std::vector<double>(32)};
  for (std::size_t i = 0; i < 32; ++i) {
    const int k = popcount(i);
    p.weights[i] = std::pow(alpha / 4, 5 - k) * std::pow(3 * alpha * beta / 4, k);
  }
  const WeakNoiseFit f = fit_weak_noise(p);
  EXPECT_NEAR(f.alpha, alpha, 1e-12);
  EXPECT_NEAR(f.beta, beta, 1e-12);
}

TEST(Sweep, CsvHeader) {
  std::ostringstream o;
  write_sweep_csv(o, {{8, 4, "haar", "0.02", 0.1, 0.2, 0, 0}});
  EXPECT_EQ(o.str().substr(0, o.str().find('\n')),
            "N,d,ensemble,defect,xeb,fidelity,xeb_se,fidelity_se");
}

}  // namespace
}  // namespace xeblab::dr
