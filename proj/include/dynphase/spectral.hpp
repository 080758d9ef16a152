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

// Biorthonormal eigen-decomposition of diagonalizable, generally
// non-Hermitian super-operators, and continuity tracking along a path.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dynphase/core.hpp"

namespace dynphase {

inline constexpr double kDefaultDegeneracyTol = 1e-8;
inline constexpr double kMaxConditionNumber = 1e12;

/// One eigenvalue with its N right vectors (columns) and N left covectors
/// (rows), normalized so that left * right = identity.
struct EigenBlock {
  Complex eigenvalue;
  Eigen::MatrixXcd right;  // dim x N
  Eigen::MatrixXcd left;   // N x dim

  Index degeneracy() const { return right.cols(); }
};

struct SpectralBasis {
  std::vector<EigenBlock> blocks;
  Index dim = 0;

  std::size_t block_count() const { return blocks.size(); }

  /// All right vectors side by side, block by block.
  Eigen::MatrixXcd right_matrix() const {
    Eigen::MatrixXcd r(dim, dim);
    Index col = 0;
    for (const auto& b : blocks) {
      r.middleCols(col, b.degeneracy()) = b.right;
      col += b.degeneracy();
    }
    return r;
  }

  Eigen::MatrixXcd left_matrix() const {
    Eigen::MatrixXcd l(dim, dim);
    Index row = 0;
    for (const auto& b : blocks) {
      l.middleRows(row, b.degeneracy()) = b.left;
      row += b.degeneracy();
    }
    return l;
  }

  /// Offset of block `b` within the concatenated member ordering.
  Index member_offset(std::size_t b) const {
    Index off = 0;
    for (std::size_t i = 0; i < b; ++i) off += blocks[i].degeneracy();
    return off;
  }

  /// Sum over blocks of |D> lambda <E|.
  SuperOperator reconstruct() const {
    SuperOperator m = SuperOperator::Zero(dim, dim);
    for (const auto& b : blocks) m += b.eigenvalue * b.right * b.left;
    return m;
  }
};

namespace detail {

inline double matrix_scale(const Eigen::MatrixXcd& m) { return std::max(1.0, m.norm()); }

// Largest-magnitude component made real positive.
inline void fix_column_gauge(Eigen::Ref<Eigen::VectorXcd> v) {
  Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const Complex pivot = v(imax);
  if (std::abs(pivot) > 0.0) v *= std::abs(pivot) / pivot;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

// Lexicographic (Re, Im) with Re ties resolved up to `tol`.
inline bool eigenvalue_before(Complex a, Complex b, double tol) {
  if (std::abs(a.real() - b.real()) > tol) return a.real() < b.real();
  return a.imag() < b.imag();
}

}  // namespace detail

/// Eigen-decomposition of a diagonalizable matrix into degenerate blocks.
///
/// Eigenvalues within tol_deg * max(1, |M|_F) of each other share a block.
/// Blocks are ordered by ascending real part, then imaginary part. Each right
/// vector has unit norm with its largest component real positive; the left
/// covectors are the rows of the inverse of the assembled right matrix.
inline SpectralBasis decompose(const SuperOperator& M, double tol_deg = kDefaultDegeneracyTol) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw DimensionMismatch("decompose expects a non-empty square matrix");
  }
  if (!M.allFinite()) throw InvalidInput("decompose: matrix has non-finite entries");

  const Index n = M.rows();
  const double scale = detail::matrix_scale(M);
  const double cluster_tol = tol_deg * scale;

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(M, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw NonDiagonalizable("eigen-solver did not converge");
  }
  const Eigen::VectorXcd values = solver.eigenvalues();
  const Eigen::MatrixXcd vectors = solver.eigenvectors();

  detail::UnionFind uf(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (std::abs(values(i) - values(j)) <= cluster_tol) {
        uf.unite(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      }
    }
  }
  std::vector<std::vector<Index>> clusters;
  {
    std::vector<std::ptrdiff_t> slot(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
      const auto root = uf.find(static_cast<std::size_t>(i));
      if (slot[root] < 0) {
        slot[root] = static_cast<std::ptrdiff_t>(clusters.size());
        clusters.emplace_back();
      }
      clusters[static_cast<std::size_t>(slot[root])].push_back(i);
    }
  }

  struct Pending {
    Complex eigenvalue;
    Eigen::MatrixXcd right;
  };
  std::vector<Pending> pending;
  pending.reserve(clusters.size());
  for (const auto& members : clusters) {
    Complex mean{};
    for (Index i : members) mean += values(i);
    mean /= static_cast<double>(members.size());
    const auto N = static_cast<Index>(members.size());

    Eigen::MatrixXcd right(n, N);
    if (N == 1) {
      right.col(0) = vectors.col(members.front()).normalized();
    } else {
      // The eigenvector back-substitution is unreliable for repeated
      // eigenvalues; take the eigenspace as the numerical kernel instead.
      const Eigen::MatrixXcd shifted = M - mean * Eigen::MatrixXcd::Identity(n, n);
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();  // descending
      if (sv(n - N) > 1e-6 * scale) {
        throw NonDiagonalizable("eigenvalue " + std::to_string(mean.real()) + "+" +
                                std::to_string(mean.imag()) + "i has geometric multiplicity < " +
                                std::to_string(N));
      }
      right = svd.matrixV().rightCols(N);
    }
    for (Index c = 0; c < N; ++c) detail::fix_column_gauge(right.col(c));
    pending.push_back({mean, std::move(right)});
  }

  const double order_tol = std::max(tol_deg, 1e-9) * scale;
  std::stable_sort(pending.begin(), pending.end(), [&](const Pending& a, const Pending& b) {
    return detail::eigenvalue_before(a.eigenvalue, b.eigenvalue, order_tol);
  });

  SpectralBasis basis;
  basis.dim = n;
  Eigen::MatrixXcd all_right(n, n);
  Index col = 0;
  for (const auto& p : pending) {
    all_right.middleCols(col, p.right.cols()) = p.right;
    col += p.right.cols();
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(all_right);
  const auto& sv = svd.singularValues();
  const double smallest = sv(n - 1);
  if (!(smallest > 0.0) || sv(0) / smallest > kMaxConditionNumber) {
    throw NonDiagonalizable("right eigenvector matrix condition number " +
                            std::to_string(smallest > 0.0 ? sv(0) / smallest
                                                          : std::numeric_limits<double>::infinity()));
  }
  const Eigen::MatrixXcd all_left = all_right.partialPivLu().inverse();

  col = 0;
  for (auto& p : pending) {
    const Index N = p.right.cols();
    basis.blocks.push_back({p.eigenvalue, std::move(p.right), all_left.middleRows(col, N)});
    col += N;
  }
  return basis;
}

/// max_ij |<E_i|D_j> - delta_ij| over all members.
inline double check_biorthonormality(const SpectralBasis& basis) {
  const Eigen::MatrixXcd g = basis.left_matrix() * basis.right_matrix();
  return max_abs(g - Eigen::MatrixXcd::Identity(g.rows(), g.cols()));
}

/// Reorders the blocks of `cur` to match `prev` by eigenvalue proximity and
/// re-gauges every block: its right vectors become the orthonormal frame of
/// the eigenspace closest to their predecessors (unit-norm, phase-matched for
/// N = 1); the left covectors take the inverse transformation, preserving
/// biorthonormality.
inline SpectralBasis align_continuity(const SpectralBasis& prev, const SpectralBasis& cur,
                                      double tol_deg = kDefaultDegeneracyTol) {
  if (prev.dim != cur.dim) throw DimensionMismatch("align_continuity: dimensions differ");
  const std::size_t m = prev.block_count();
  if (cur.block_count() != m) {
    throw AmbiguousMatching("block count changed from " + std::to_string(m) + " to " +
                            std::to_string(cur.block_count()) + " (level crossing?)");
  }

  double scale = 1.0;
  for (const auto& b : prev.blocks) scale = std::max(scale, std::abs(b.eigenvalue));
  const double tie_tol = tol_deg * scale;

  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best_perm;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();

  auto cost_of = [&](const std::vector<std::size_t>& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (prev.blocks[i].degeneracy() != cur.blocks[p[i]].degeneracy()) {
        return std::numeric_limits<double>::infinity();
      }
      c = std::max(c, std::abs(prev.blocks[i].eigenvalue - cur.blocks[p[i]].eigenvalue));
    }
    return c;
  };

  if (m <= 8) {
    do {
      const double c = cost_of(perm);
      if (c < best) {
        second = best;
        best = c;
        best_perm = perm;
      } else if (c < second) {
        second = c;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    // Greedy nearest match for large block counts.
    std::vector<bool> used(m, false);
    best_perm.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        if (used[j] || cur.blocks[j].degeneracy() != prev.blocks[i].degeneracy()) continue;
        const double dj = std::abs(prev.blocks[i].eigenvalue - cur.blocks[j].eigenvalue);
        if (dj < d) {
          d = dj;
          best_perm[i] = j;
        }
      }
      used[best_perm[i]] = true;
    }
    best = cost_of(best_perm);
  }
  if (!std::isfinite(best)) {
    throw AmbiguousMatching("no block pairing preserves degeneracies");
  }
  if (std::isfinite(second) && second - best <= tie_tol) {
    throw AmbiguousMatching("two eigenvalue pairings within tolerance (level crossing?)");
  }

  SpectralBasis out;
  out.dim = cur.dim;
  out.blocks.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const EigenBlock& c = cur.blocks[best_perm[i]];
    const EigenBlock& p = prev.blocks[i];
    // Orthonormal frame of the new eigenspace, then the unitary that brings
    // it closest to the previous vectors (orthogonal Procrustes).
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(c.right);
    const Index N = c.right.cols();
    const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(c.right.rows(), N);
    const Eigen::MatrixXcd R = Q.adjoint() * c.right;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Q.adjoint() * p.right,
                                           Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()(N - 1) < 1e-8 * std::max(1.0, svd.singularValues()(0))) {
      throw AmbiguousMatching("eigenspace rotated orthogonally to its predecessor");
    }
    const Eigen::MatrixXcd U = svd.matrixU() * svd.matrixV().adjoint();
    // right' = C R^-1 U, so left' = U^H R left
    out.blocks.push_back({c.eigenvalue, Q * U, U.adjoint() * R * c.left});
  }
  return out;
}

/// Continuity-aligned bases sampled on a uniform grid, plus kGuard extra
/// samples beyond each end so that right-vector derivatives can use centred
/// five-point differences everywhere on the grid.
class BasisPath {
 public:
  static constexpr std::ptrdiff_t kGuard = 2;

  BasisPath(TimeGrid grid, std::vector<SpectralBasis> samples)
      : grid_(grid), samples_(std::move(samples)) {
    if (samples_.size() != grid_.size() + 2 * kGuard) {
      throw DimensionMismatch("BasisPath: expected " + std::to_string(grid_.size() + 2 * kGuard) +
                              " samples");
    }
    compute_derivatives();
  }

  const TimeGrid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  std::size_t block_count() const { return samples_.front().block_count(); }
  Index dim() const { return samples_.front().dim; }

  /// Basis at grid index k, -kGuard <= k <= steps + kGuard.
  const SpectralBasis& at(std::ptrdiff_t k) const {
    return samples_[static_cast<std::size_t>(k + kGuard)];
  }

  /// d/dt of the right vectors of `block` at grid index k (0 <= k <= steps).
  const Eigen::MatrixXcd& right_derivative(std::size_t k, std::size_t block) const {
    return derivatives_[k][block];
  }

  /// New path with every block's vectors multiplied by factor(t, block) and
  /// its covectors by the inverse.
  BasisPath regauged(const std::function<Complex(double, std::size_t)>& factor) const {
    std::vector<SpectralBasis> s = samples_;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double t = grid_.time(static_cast<std::ptrdiff_t>(i) - kGuard);
      for (std::size_t b = 0; b < s[i].blocks.size(); ++b) {
        const Complex f = factor(t, b);
        s[i].blocks[b].right *= f;
        s[i].blocks[b].left /= f;
      }
    }
    return BasisPath(grid_, std::move(s));
  }

 private:
  void compute_derivatives() {
    const double h = grid_.step();
    derivatives_.resize(grid_.size());
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      const auto kk = static_cast<std::ptrdiff_t>(k);
      const auto& m2 = at(kk - 2);
      const auto& m1 = at(kk - 1);
      const auto& p1 = at(kk + 1);
      const auto& p2 = at(kk + 2);
      derivatives_[k].resize(block_count());
      for (std::size_t b = 0; b < block_count(); ++b) {
        derivatives_[k][b] = (m2.blocks[b].right - 8.0 * m1.blocks[b].right +
                              8.0 * p1.blocks[b].right - p2.blocks[b].right) /
                             (12.0 * h);
      }
    }
  }

  TimeGrid grid_;
  std::vector<SpectralBasis> samples_;
  std::vector<std::vector<Eigen::MatrixXcd>> derivatives_;
};

/// Decomposes sampler(t) along the grid (plus guard points) and aligns each
/// sample to its predecessor.
inline BasisPath track_basis(const std::function<SuperOperator(double)>& sampler,
                             const TimeGrid& grid, double tol_deg = kDefaultDegeneracyTol) {
  std::vector<SpectralBasis> samples;
  samples.reserve(grid.size() + 2 * BasisPath::kGuard);
  const auto last = static_cast<std::ptrdiff_t>(grid.steps()) + BasisPath::kGuard;
  for (std::ptrdiff_t k = -BasisPath::kGuard; k <= last; ++k) {
    SpectralBasis b = decompose(sampler(grid.time(k)), tol_deg);
    if (!samples.empty()) b = align_continuity(samples.back(), b, tol_deg);
    samples.push_back(std::move(b));
  }
  return BasisPath(grid, std::move(samples));
}

}  // namespace dynphase
