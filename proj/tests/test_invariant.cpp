// Copyright 2026 The dynphase Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "dynphase/invariant.hpp"
#include "dynphase/superop.hpp"
#include "oracles.hpp"

using namespace dynphase;

namespace {

SuperOperator dephasing_block(double w, double g) {
  return extract_internal_block(build_lindblad(DecoherenceChannel::dephasing(w, g)));
}

SuperOperator lbf(double w, double g) { return build_lindblad(DecoherenceChannel::bit_flip(w, g)); }

SuperOperator ise(Complex q, Complex p, Complex a, Complex b, Complex c, Complex d, Complex x, Complex y) {
  SuperOperator m(4, 4);
  m << q, 0, 0, p, 0, a, b, 0, 0, c, d, 0, x, 0, 0, y;
  return m;
}

double max_residual_at_random_times(const InvariantTrajectory& traj, const SuperOperator& L, int n, double t_max) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = oracle::uniform(0.0, t_max);
    worst = std::max(worst, max_abs(traj.derivative(t) - invariant_rhs(L, traj.value(t))));
  }
  return worst;
}

}  // namespace

TEST(InvariantRhs, DephasingCommutatorIgnoresRate) {
  const double w = 0.8;
  SuperOperator I(2, 2);
  const Complex a(0.3, 0.1), b(-0.7, 0), c(0.2, 0.4), d(1.1, 0);
  I << a, b, c, d;
  SuperOperator ref(2, 2);
  ref << -b - c, a - d, a - d, b + c;
  ref *= w;
  for (double g : {0.0, 0.5, 2.0}) EXPECT_LT(max_abs(invariant_rhs(dephasing_block(w, g), I) - ref), 1e-14);
}

TEST(InvariantRhs, IdentityCommutes) {
  EXPECT_EQ(max_abs(invariant_rhs(lbf(1.0, 0.4), SuperOperator::Identity(4, 4))), 0.0);
}

TEST(InvariantRhs, BitFlipAgainstGeneralForm) {
  const double w = 1.2, g = 0.35, g2 = g * g;
  const Complex q(0.5), p(0.2), a(0.3), b(-0.4), c(0.6), d(0.1), x(0.7), y(-0.2);
  const Complex e = b + c, eta = a - d;
  SuperOperator ref(4, 4);
  ref << 0, 0, 0, 2 * g2 * p, 0, -e * w, 2.0 * b * g2 + eta * w, 0, 0, -2.0 * c * g2 + eta * w, e * w, 0, -2 * g2 * x,
      0, 0, 0;
  EXPECT_LT(max_abs(invariant_rhs(lbf(w, g), ise(q, p, a, b, c, d, x, y)) - ref), 1e-14);
}

TEST(InvariantRhs, SpontaneousEmissionAgainstGeneralForm) {
  const double w = 0.9, g = 0.45, g2 = g * g;
  const Complex q(0.5), p(0.2), a(0.3), b(-0.4), c(0.6), d(0.1), x(0.7), y(-0.2);
  const Complex e = b + c, eta = a - d;
  SuperOperator ref(4, 4);
  ref << -4.0 * g2 * p, 0, 0, 4.0 * g2 * p, 0, -e * w, eta * w, 0, 0, eta * w, e * w, 0, 4.0 * g2 * (q - x - y), 0,
      0, 4.0 * g2 * p;
  const SuperOperator L = build_lindblad(DecoherenceChannel::spontaneous_emission(w, g));
  EXPECT_LT(max_abs(invariant_rhs(L, ise(q, p, a, b, c, d, x, y)) - ref), 1e-14);
}

TEST(InvariantRhs, DimensionMismatch) {
  EXPECT_THROW(invariant_rhs(SuperOperator::Zero(2, 2), SuperOperator::Zero(4, 4)), DimensionMismatch);
}

TEST(DephasingFamily, ValueAtStart) {
  SuperOperator ref(2, 2);
  ref << 1, -0.5, -0.5, -1;
  EXPECT_LT(max_abs(dephasing_family(1.0, 0.5, 0.0, 0.0, 1.0).value(0.0) - ref), 1e-15);
}

TEST(DephasingFamily, ConstantMember) {
  const auto traj = dephasing_family(0.0, 0.0, 0.6, 0.8, 1.0);
  SuperOperator ref(2, 2);
  ref << 0.3, -0.4, 0.4, 0.3;
  for (double t : {0.0, 1.0, 7.3}) {
    EXPECT_LT(max_abs(traj.value(t) - ref), 1e-15);
    EXPECT_EQ(max_abs(traj.derivative(t)), 0.0);
  }
}

TEST(DephasingFamily, MatchesRotatedInitialValue) {
  for (int n = 0; n < 20; ++n) {
    const double a1 = oracle::uniform(-1, 1), a2 = oracle::uniform(-1, 1), c1 = oracle::uniform(-1, 1),
                 c2 = oracle::uniform(-1, 1), w = oracle::uniform(0.5, 2);
    const auto traj = dephasing_family(a1, a2, c1, c2, w);
    for (double t : {0.3, 2.0, 5.5})
      EXPECT_LT(max_abs(traj.value(t) - oracle::dephasing_exact(a1, a2, c1, c2, w, t)), 1e-13);
  }
}

TEST(DephasingFamily, SolvesForEveryRate) {
  for (int n = 0; n < 10; ++n) {
    const double w = oracle::uniform(0.5, 2);
    const auto traj =
        dephasing_family(oracle::uniform(-1, 1), oracle::uniform(-1, 1), oracle::uniform(-1, 1), 0.1, w);
    for (double g : {0.0, 0.5, 2.0}) EXPECT_LT(max_residual_at_random_times(traj, dephasing_block(w, g), 100, 20), 1e-13);
  }
}

TEST(DephasingFamily, DegenerateRejected) {
  EXPECT_THROW(dephasing_family(0.5, 0.0, 0.0, 1.0, 1.0), DegenerateFamily);
  EXPECT_THROW(dephasing_family(0.3, 0.4, 1.0, -1.0, 1.0), DegenerateFamily);
  EXPECT_NO_THROW(dephasing_family(0.5, 0.0, 0.0, 0.9, 1.0));
}

TEST(SeFamily, OuterBlockCommutes) {
  const DephasingParams p{1.0, 0.5, 0.0, 0.0, 1.0};
  const auto traj = se_family(p, 1.0, 0.0);
  const SuperOperator I = traj.value(0.0);
  EXPECT_EQ(I(3, 3), Complex(1.0));
  const SuperOperator L = build_lindblad(DecoherenceChannel::spontaneous_emission(1.0, 0.3));
  const SuperOperator c = invariant_rhs(L, traj.value(0.4));
  EXPECT_LT(std::abs(c(0, 0)) + std::abs(c(0, 3)) + std::abs(c(3, 0)) + std::abs(c(3, 3)), 1e-15);
}

TEST(SeFamily, ConstantMember) {
  const auto traj = se_family(DephasingParams{0.0, 0.0, 0.4, 0.2, 1.0}, 0.0, 0.0);
  EXPECT_LT(max_abs(traj.value(3.0) - traj.value(0.0)), 1e-15);
  EXPECT_EQ(max_abs(traj.derivative(1.0)), 0.0);
}

TEST(SeFamily, SolvesForEveryRate) {
  const DephasingParams p{0.7, -0.3, 0.2, 0.5, 1.0};
  const auto traj = se_family(p, 0.8, -0.4);
  for (double g : {0.0, 0.3, 1.0}) {
    const SuperOperator L = build_lindblad(DecoherenceChannel::spontaneous_emission(1.0, g));
    EXPECT_LT(max_residual_at_random_times(traj, L, 200, 20), 1e-12);
    const SuperOperator Ld = build_lindblad(DecoherenceChannel::dephasing(1.0, g));
    EXPECT_LT(max_residual_at_random_times(traj, Ld, 200, 20), 1e-12);
  }
  EXPECT_THROW(se_family(DephasingParams{0.5, 0.0, 0.0, 1.0, 1.0}, 1.0, 0.0), DegenerateFamily);
}

TEST(BitFlipFamily, SigmaZeroForcesC1) {
  BitFlipParams p;
  p.alpha1 = 0.4;
  EXPECT_EQ(p.sigma1(), 0.0);
  EXPECT_EQ(p.c1_value(), 0.8);
  p.c1 = 1.0;
  EXPECT_NEAR(p.gamma_b * p.gamma_b * p.sigma1() + p.omega * (2 * p.alpha1 - p.c1_value()), 0.0, 1e-15);
}

TEST(BitFlipFamily, ZeroAmplitudesGiveConstant) {
  const auto traj = bitflip_family(0.3, 0.0, 0.0, 1.0, 0.2);
  SuperOperator ref = SuperOperator::Zero(4, 4);
  ref(1, 1) = 0.3;
  ref(2, 2) = -0.3 + 0.6;
  for (double t : {0.0, 2.0, 9.0}) {
    EXPECT_LT(max_abs(traj.value(t) - ref), 1e-15);
    EXPECT_EQ(max_abs(traj.derivative(t)), 0.0);
  }
}

TEST(BitFlipFamily, SolvesBitFlipGenerator) {
  const auto traj = bitflip_family(0.0, -0.5, 1.0, 1.0, 0.1);
  EXPECT_LT(max_residual_at_random_times(traj, lbf(1.0, 0.1), 1000, 6 * M_PI), 1e-10);
}

TEST(BitFlipFamily, RandomParametersSolve) {
  for (int n = 0; n < 20; ++n) {
    BitFlipParams p{oracle::uniform(-1, 1), oracle::uniform(-1, 1), oracle::uniform(-1, 1),
                    oracle::uniform(0.5, 1.5), oracle::uniform(0.05, 1.5), oracle::uniform(-1, 1)};
    if (std::abs(std::pow(p.gamma_b, 4) - p.omega * p.omega) < 1e-3) continue;
    const auto traj = bitflip_family(p);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double t = oracle::uniform(0, 3);
      const SuperOperator I = traj.value(t);
      worst = std::max(worst, max_abs(traj.derivative(t) - invariant_rhs(lbf(p.omega, p.gamma_b), I)) /
                                  std::max(1.0, max_abs(I)));
    }
    EXPECT_LT(worst, 1e-12);
  }
}

TEST(BitFlipFamily, Errors) {
  EXPECT_THROW(bitflip_family(0.0, -0.5, 1.0, 1.0, 1.0), SingularXi);
  BitFlipParams p;
  p.gamma_b = 0.0;
  p.c1 = 1.0;
  EXPECT_THROW(bitflip_family(p), InvalidInput);
}

TEST(BitFlipFamily, RateIndependenceOnlyForConstants) {
  // gamma_b enters [L, I] only through 2 gamma_b^2 (beta, -gamma) and the
  // outer x, p; removing it leaves a commutator that vanishes only for alpha = delta.
  const SuperOperator I = ise(0.4, 0.0, 0.25, 0.0, 0.0, 0.25, 0.0, -0.3);
  for (double g : {0.0, 0.3, 1.7}) EXPECT_EQ(max_abs(invariant_rhs(lbf(1.0, g), I)), 0.0);
  const auto traj = bitflip_family(0.0, -0.5, 1.0, 1.0, 0.1);
  const SuperOperator It = traj.value(1.0);
  EXPECT_GT(max_abs(invariant_rhs(lbf(1.0, 0.1), It) - invariant_rhs(lbf(1.0, 0.5), It)), 1e-3);
}

TEST(VerifyInvariant, DephasingFamilyExact) {
  const auto traj = dephasing_family(1.0, 0.5, 0.2, 0.3, 1.0);
  const SuperOperator L = dephasing_block(1.0, 0.4);
  const auto r = verify_invariant(traj, constant_generator(L), TimeGrid::over(0, kTwoPi, 1e-3));
  EXPECT_LT(r.max_residual, 1e-10);
  EXPECT_LT(r.max_eigen_drift, 1e-10);
}

TEST(VerifyInvariant, DetectsNonInvariant) {
  InvariantTrajectory traj;
  SuperOperator I(2, 2);
  I << 1, 0, 0, -1;
  traj.value = [I](double) { return I; };
  traj.derivative = [](double) { return SuperOperator(SuperOperator::Zero(2, 2)); };
  traj.dim = 2;
  const SuperOperator L = dephasing_block(1.0, 0.2);
  const auto r = verify_invariant(traj, constant_generator(L), TimeGrid::over(0, 1, 0.1));
  EXPECT_NEAR(r.max_residual, max_abs(invariant_rhs(L, I)), 1e-15);
  EXPECT_GT(r.max_residual, 0.5);
}

TEST(VerifyInvariant, BitFlipEigenvaluesConstant) {
  const BitFlipParams p;
  const auto traj = bitflip_family(p);
  const TimeGrid grid = TimeGrid::over(0, kTwoPi, 1e-3);
  const auto r = verify_invariant(traj, constant_generator(lbf(1.0, 0.1)), grid);
  EXPECT_LT(r.max_residual, 1e-10);
  EXPECT_LT(r.max_eigen_drift, 1e-8);
  const auto [lo, hi] = p.eigenvalues();
  EXPECT_NEAR(std::abs(lo - Complex(0, -std::sqrt(0.5))), 0.0, 1e-15);
  for (double t : {0.0, 2.0, 5.0}) {
    const SpectralBasis b = decompose(traj.value(t));
    std::vector<Complex> ev;
    for (const auto& blk : b.blocks) ev.push_back(blk.eigenvalue);
    for (Complex target : {lo, hi}) {
      double best = 1.0;
      for (Complex e : ev) best = std::min(best, std::abs(e - target));
      EXPECT_LT(best, 1e-8);
    }
  }
}

TEST(SolveInvariant, IdentityStaysConstant) {
  const auto traj = solve_invariant(constant_generator(lbf(1.0, 0.3)), SuperOperator::Identity(4, 4),
                                    TimeGrid::over(0, 2, 1e-3));
  for (double t : {0.0, 0.77, 2.0}) EXPECT_LT(max_abs(traj.value(t) - SuperOperator::Identity(4, 4)), 1e-14);
}

TEST(SolveInvariant, DephasingMatchesClosedForm) {
  const double w = 1.0;
  const auto exact = dephasing_family(1.0, 0.5, 0.2, 0.3, w);
  const TimeGrid grid = TimeGrid::over(0, kTwoPi / w, 1e-3);
  const Generator L = constant_generator(dephasing_block(w, 0.5));
  const auto traj = solve_invariant(L, exact.value(0.0), grid);
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); k += 7) {
    const double t = grid.time(static_cast<std::ptrdiff_t>(k));
    worst = std::max(worst, max_abs(traj.value(t) - exact.value(t)));
  }
  EXPECT_LT(worst, 1e-8);
  const auto r = verify_invariant(traj, L, grid);
  EXPECT_LT(r.max_residual, 1e-8);
  EXPECT_LT(r.max_eigen_drift, 1e-8);
  EXPECT_FALSE(traj.analytic);
}

TEST(SolveInvariant, BitFlipMatchesClosedForm) {
  const auto exact = bitflip_family(0.0, -0.5, 1.0, 1.0, 0.1);
  const TimeGrid grid = TimeGrid::over(0, kTwoPi, 1e-3);
  const auto traj = solve_invariant(constant_generator(lbf(1.0, 0.1)), exact.value(0.0), grid);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double t = oracle::uniform(0, kTwoPi);
    worst = std::max(worst, max_abs(traj.value(t) - exact.value(t)));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(SolveInvariant, CoarseStepRejected) {
  const auto exact = dephasing_family(1.0, 0.5, 0.2, 0.3, 1.0);
  EXPECT_THROW(solve_invariant(constant_generator(dephasing_block(1.0, 0.5)), exact.value(0.0),
                               TimeGrid::over(0, kTwoPi, 0.5)),
               StepTooLarge);
  EXPECT_THROW(solve_invariant(constant_generator(dephasing_block(1.0, 0.5)), SuperOperator::Identity(4, 4),
                               TimeGrid::over(0, 1, 0.1)),
               DimensionMismatch);
}
