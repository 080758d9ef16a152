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
#include "dynphase/spectral.hpp"
#include "oracles.hpp"

using namespace dynphase;

namespace {

SuperOperator random_matrix(Index n) {
  SuperOperator m(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) m(r, c) = {oracle::uniform(-1, 1), oracle::uniform(-1, 1)};
  return m;
}

SuperOperator diagonal(std::initializer_list<Complex> d) {
  Eigen::VectorXcd v(static_cast<Index>(d.size()));
  Index i = 0;
  for (Complex x : d) v(i++) = x;
  return v.asDiagonal();
}

}  // namespace

TEST(Decompose, DephasingGenerator) {
  const double w = 1.0, g = 0.3;
  SuperOperator M(2, 2);
  M << -2 * g * g, -w, w, -2 * g * g;
  const SpectralBasis b = decompose(M);
  ASSERT_EQ(b.block_count(), 2u);
  for (const auto& blk : b.blocks) {
    EXPECT_NEAR(blk.eigenvalue.real(), -2 * g * g, 1e-14);
    EXPECT_NEAR(std::abs(blk.eigenvalue.imag()), w, 1e-14);
    EXPECT_LT((M * blk.right - blk.eigenvalue * blk.right).norm(), 1e-12);
    // v proportional to (+-i, 1)
    const Complex ratio = blk.right(0, 0) / blk.right(1, 0);
    EXPECT_NEAR(std::abs(ratio - Complex(0, blk.eigenvalue.imag() > 0 ? 1 : -1)), 0.0, 1e-12);
  }
}

TEST(Decompose, IdentityIsOneBlock) {
  const SpectralBasis b = decompose(SuperOperator::Identity(4, 4));
  ASSERT_EQ(b.block_count(), 1u);
  EXPECT_EQ(b.blocks[0].degeneracy(), 4);
  EXPECT_NEAR(std::abs(b.blocks[0].eigenvalue - 1.0), 0.0, 1e-15);
  EXPECT_LT(check_biorthonormality(b), 1e-10);
}

TEST(Decompose, RotatingInvariantAtStart) {
  const SpectralBasis b = decompose(dephasing_family(1.0, 0.0, 0.0, 0.0, 1.0).value(0.0));
  ASSERT_EQ(b.block_count(), 2u);
  EXPECT_NEAR(std::abs(b.blocks[0].eigenvalue + 1.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(b.blocks[1].eigenvalue - 1.0), 0.0, 1e-14);
}

TEST(Decompose, JordanBlockRejected) {
  SuperOperator J(2, 2);
  J << 1, 1, 0, 1;
  EXPECT_THROW(decompose(J), NonDiagonalizable);
  EXPECT_THROW(decompose(SuperOperator(2, 3)), DimensionMismatch);
}

TEST(Decompose, ReconstructsRandomMatrices) {
  for (int n = 0; n < 50; ++n) {
    const SuperOperator M = random_matrix(4);
    const SpectralBasis b = decompose(M);
    EXPECT_LT(max_abs(b.reconstruct() - M), 1e-9);
    EXPECT_LT(check_biorthonormality(b), 1e-10);
  }
}

TEST(Decompose, DegenerateBlocksReconstruct) {
  for (int n = 0; n < 20; ++n) {
    const SuperOperator P = random_matrix(4);
    const SuperOperator M = P * diagonal({2.0, 2.0, Complex(0, 1), -1.0}) * P.inverse();
    const SpectralBasis b = decompose(M);
    ASSERT_EQ(b.block_count(), 3u);
    EXPECT_LT(max_abs(b.reconstruct() - M), 1e-9);
    EXPECT_LT(check_biorthonormality(b), 1e-10);
  }
}

TEST(CheckBiorthonormality, DoubledVectorDetected) {
  SpectralBasis b = decompose(random_matrix(3));
  b.blocks[1].right *= 2.0;
  EXPECT_GE(check_biorthonormality(b), 1.0);
}

TEST(CheckBiorthonormality, GaugeInvariant) {
  SpectralBasis b = decompose(random_matrix(4));
  const double before = check_biorthonormality(b);
  const Complex f = std::polar(3.0, 0.7);
  b.blocks[2].right *= f;
  b.blocks[2].left /= f;
  EXPECT_NEAR(check_biorthonormality(b), before, 1e-12);
}

TEST(CheckBiorthonormality, RotatingInvariantSamples) {
  const auto traj = dephasing_family(0.8, 0.3, 0.2, 0.4, 1.0);
  for (int n = 0; n < 50; ++n) {
    EXPECT_LT(check_biorthonormality(decompose(traj.value(oracle::uniform(0, 20)))), 1e-10);
  }
}

TEST(AlignContinuity, IdenticalInputUnchanged) {
  const SpectralBasis b = decompose(random_matrix(4));
  const SpectralBasis a = align_continuity(b, b);
  for (std::size_t i = 0; i < b.block_count(); ++i) {
    EXPECT_EQ(a.blocks[i].eigenvalue, b.blocks[i].eigenvalue);
    EXPECT_LT(max_abs(a.blocks[i].right - b.blocks[i].right), 1e-12);
    EXPECT_LT(max_abs(a.blocks[i].left - b.blocks[i].left), 1e-12);
  }
}

TEST(AlignContinuity, RestoresSwappedOrder) {
  const SpectralBasis prev = decompose(diagonal({1.0, 2.0, 3.0}));
  SpectralBasis cur = decompose(diagonal({1.0, 2.0, 3.0}));
  std::swap(cur.blocks[0], cur.blocks[2]);
  const SpectralBasis a = align_continuity(prev, cur);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.blocks[i].eigenvalue, prev.blocks[i].eigenvalue);
    EXPECT_LT(max_abs(a.blocks[i].right - prev.blocks[i].right), 1e-12);
  }
}

TEST(AlignContinuity, TiedPairingsRejected) {
  const SpectralBasis prev = decompose(diagonal({-1.0, 1.0}));
  const SpectralBasis cur = decompose(diagonal({Complex(0, -1), Complex(0, 1)}));
  EXPECT_THROW(align_continuity(prev, cur), AmbiguousMatching);
  EXPECT_THROW(align_continuity(prev, decompose(diagonal({1.0, 2.0, 3.0}))), DimensionMismatch);
  EXPECT_THROW(align_continuity(prev, decompose(SuperOperator::Identity(2, 2))), AmbiguousMatching);
}

TEST(AlignContinuity, PreservesBiorthonormality) {
  const auto traj = dephasing_family(0.8, 0.3, 0.2, 0.4, 1.0);
  const SpectralBasis a = align_continuity(decompose(traj.value(1.0)), decompose(traj.value(1.001)));
  EXPECT_LT(check_biorthonormality(a), 1e-10);
}

TEST(TrackBasis, StepChangeIsOrderDt) {
  const auto traj = dephasing_family(1.0, 0.0, 0.0, 0.0, 1.0);
  for (double dt : {1e-3, 5e-4}) {
    const BasisPath path = track_basis(traj.value, TimeGrid::over(0.0, kTwoPi, dt));
    double worst = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) {
      const auto d = static_cast<std::ptrdiff_t>(k);
      for (std::size_t b = 0; b < path.block_count(); ++b) {
        worst = std::max(worst, (path.at(d).blocks[b].right - path.at(d - 1).blocks[b].right).norm());
      }
    }
    EXPECT_LT(worst, 2.0 * dt);
    EXPECT_GT(worst, 0.1 * dt);
  }
}

TEST(TrackBasis, DerivativeConverges) {
  // Real eigenvectors of the rotating invariant are transported rigidly:
  // dD/dt = omega J D.
  const double w = 1.3;
  const auto traj = dephasing_family(0.9, 0.2, 0.1, 0.3, w);
  SuperOperator J(2, 2);
  J << 0, -1, 1, 0;
  std::vector<double> errors;
  for (double dt : {0.04, 0.02}) {
    const BasisPath path = track_basis(traj.value, TimeGrid::over(0.0, 2.0, dt));
    double worst = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
      for (std::size_t b = 0; b < 2; ++b) {
        const auto& D = path.at(static_cast<std::ptrdiff_t>(k)).blocks[b].right;
        worst = std::max(worst, max_abs(path.right_derivative(k, b) - w * J * D));
      }
    }
    errors.push_back(worst);
  }
  EXPECT_LT(errors[1], 0.5 * errors[0]);
  EXPECT_LT(errors[1], 1e-5);
}

TEST(TrackBasis, RegaugedPathRescalesBlocks) {
  const auto traj = dephasing_family(1.0, 0.5, 0.0, 0.0, 1.0);
  const BasisPath path = track_basis(traj.value, TimeGrid::over(0.0, 1.0, 0.01));
  const BasisPath g = path.regauged([](double t, std::size_t b) { return std::polar(1.0 + t, 0.3 * t + b); });
  for (std::size_t k = 0; k < path.size(); ++k) {
    const auto d = static_cast<std::ptrdiff_t>(k);
    EXPECT_LT(check_biorthonormality(g.at(d)), 1e-10);
    const double t = path.grid().time(d);
    EXPECT_LT(max_abs(g.at(d).blocks[1].right - std::polar(1.0 + t, 0.3 * t + 1) * path.at(d).blocks[1].right),
              1e-12);
  }
}
