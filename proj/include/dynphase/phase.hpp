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

// Geometric and dynamical phases of the eigenbasis of a dynamical invariant.
//
// For a block b with right vectors D_b(t) and left covectors E_b(t):
//   geometric integral  G_b(t) = -int_0^t <E_b|dD_b/dt> dt'
//   log correction      ln <E_b(0)|D_b(t)>        (principal branch)
//   dynamical           K_b(t) = int_0^t <E_b|L|D_b> dt'
// Degenerate blocks use the matrix versions A = -<E|dD>, H = <E|L|D> and
// their time-ordered exponentials.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "dynphase/core.hpp"
#include "dynphase/invariant.hpp"
#include "dynphase/spectral.hpp"

namespace dynphase {

inline constexpr double kClosureTol = 1e-6;
inline constexpr double kOverlapFloor = 1e-12;
inline constexpr double kAdvisoryTol = 1e-8;
inline constexpr double kPropagatorTol = 1e-8;

inline const Complex kNaN{std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN()};

// ---------------------------------------------------------------------------
// Quadrature

/// Running integral of uniformly sampled f: composite Simpson on even
/// indices, and a three-point rule for the last interval on odd ones.
template <class T>
std::vector<T> cumulative_simpson(const std::vector<T>& f, double h) {
  std::vector<T> out(f.size());
  if (f.empty()) return out;
  out[0] = f[0] * 0.0;
  if (f.size() == 2) {
    out[1] = 0.5 * h * (f[0] + f[1]);
    return out;
  }
  for (std::size_t k = 1; k < f.size(); ++k) {
    if (k == 1) {
      out[1] = (h / 12.0) * (5.0 * f[0] + 8.0 * f[1] - f[2]);
    } else if (k % 2 == 0) {
      out[k] = out[k - 2] + (h / 3.0) * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
    } else {
      out[k] = out[k - 1] + (h / 12.0) * (-f[k - 2] + 8.0 * f[k - 1] + 5.0 * f[k]);
    }
  }
  return out;
}

/// |S_h - S_2h| / 15 for the full-range integral; 0 when the grid is too
/// short to coarsen.
inline double simpson_error_estimate(const std::vector<Complex>& f, double h) {
  if (f.size() < 5) return 0.0;
  const std::size_t n = f.size() - 1;
  const std::size_t even = n - n % 4;
  auto simpson = [&](std::size_t stride) {
    Complex s{};
    const double hh = h * static_cast<double>(stride);
    for (std::size_t k = 0; k + 2 * stride <= even; k += 2 * stride) {
      s += (hh / 3.0) * (f[k] + 4.0 * f[k + stride] + f[k + 2 * stride]);
    }
    return s;
  };
  return std::abs(simpson(1) - simpson(2)) / 15.0;
}

// ---------------------------------------------------------------------------
// Basis paths and block matrices

inline BasisPath invariant_path(const InvariantTrajectory& traj, const TimeGrid& grid,
                                double tol_deg = kDefaultDegeneracyTol) {
  return track_basis(traj.value, grid, tol_deg);
}

struct BlockMatrices {
  Eigen::MatrixXcd H;  // <E|L|D>
  Eigen::MatrixXcd A;  // -<E|dD/dt>
  Eigen::MatrixXcd M;  // H + A
};

/// Block matrices at grid index k. H is zero when L is empty.
inline BlockMatrices nonabelian_matrices(const BasisPath& path, const Generator& L, std::size_t k,
                                         std::size_t block) {
  const auto& b = path.at(static_cast<std::ptrdiff_t>(k)).blocks[block];
  BlockMatrices m;
  m.A = -b.left * path.right_derivative(k, block);
  if (L) {
    m.H = b.left * L(path.grid().time(static_cast<std::ptrdiff_t>(k))) * b.right;
  } else {
    m.H = Eigen::MatrixXcd::Zero(m.A.rows(), m.A.cols());
  }
  m.M = m.H + m.A;
  return m;
}

/// All blocks at time t, differentiating over +-2 samples of spacing h.
inline std::vector<BlockMatrices> nonabelian_matrices(const InvariantTrajectory& traj,
                                                      const Generator& L, double t,
                                                      double h = 1e-3,
                                                      double tol_deg = kDefaultDegeneracyTol) {
  const BasisPath path = invariant_path(traj, TimeGrid::over(t, t, h), tol_deg);
  std::vector<BlockMatrices> out;
  for (std::size_t b = 0; b < path.block_count(); ++b) out.push_back(nonabelian_matrices(path, L, 0, b));
  return out;
}

/// max over the grid and over blocks a != b of |<E_b|(L - d/dt)|D_a>|.
inline double check_block_decoupling(const BasisPath& path, const Generator& L) {
  double worst = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const auto& basis = path.at(static_cast<std::ptrdiff_t>(k));
    const SuperOperator Lk = L(path.grid().time(static_cast<std::ptrdiff_t>(k)));
    for (std::size_t a = 0; a < basis.block_count(); ++a) {
      const Eigen::MatrixXcd OD = Lk * basis.blocks[a].right - path.right_derivative(k, a);
      for (std::size_t b = 0; b < basis.block_count(); ++b) {
        if (a == b) continue;
        worst = std::max(worst, max_abs(basis.blocks[b].left * OD));
      }
    }
  }
  return worst;
}

inline double check_block_decoupling(const InvariantTrajectory& traj, const Generator& L,
                                     const TimeGrid& grid,
                                     double tol_deg = kDefaultDegeneracyTol) {
  return check_block_decoupling(invariant_path(traj, grid, tol_deg), L);
}

// ---------------------------------------------------------------------------
// Abelian phases along a path

/// Per-block, per-sample phase ingredients. Entries of degenerate blocks are
/// NaN; use the non-Abelian routines for those.
struct PhaseSeries {
  TimeGrid grid;
  std::vector<Complex> eigenvalues;
  std::vector<Index> degeneracy;
  std::vector<std::vector<Complex>> geometric_integral;  // [block][k]
  std::vector<std::vector<Complex>> dynamical;           // empty without a generator
  std::vector<std::vector<Complex>> overlap;             // <E(0)|D(t)>
  double quadrature_error = 0.0;

  std::size_t block_count() const { return eigenvalues.size(); }

  /// Principal Log of the overlap; NaN below the overlap floor.
  Complex ln_correction(std::size_t b, std::size_t k) const {
    const Complex ov = overlap[b][k];
    if (!(std::abs(ov) >= kOverlapFloor)) return kNaN;
    return std::log(ov);
  }

  Complex total_geometric(std::size_t b, std::size_t k) const {
    return ln_correction(b, k) + geometric_integral[b][k];
  }
};

inline PhaseSeries phase_series(const BasisPath& path, const Generator& L = {}) {
  PhaseSeries s;
  s.grid = path.grid();
  const std::size_t n = path.size();
  const std::size_t m = path.block_count();
  const auto& first = path.at(0);
  for (const auto& b : first.blocks) {
    s.eigenvalues.push_back(b.eigenvalue);
    s.degeneracy.push_back(b.degeneracy());
  }
  s.geometric_integral.assign(m, std::vector<Complex>(n, kNaN));
  s.overlap.assign(m, std::vector<Complex>(n, kNaN));
  if (L) s.dynamical.assign(m, std::vector<Complex>(n, kNaN));

  for (std::size_t b = 0; b < m; ++b) {
    if (s.degeneracy[b] != 1) continue;
    std::vector<Complex> geo(n), dyn(L ? n : 0);
    for (std::size_t k = 0; k < n; ++k) {
      const BlockMatrices bm = nonabelian_matrices(path, L, k, b);
      geo[k] = bm.A(0, 0);
      if (L) dyn[k] = bm.H(0, 0);
      s.overlap[b][k] =
          (first.blocks[b].left * path.at(static_cast<std::ptrdiff_t>(k)).blocks[b].right)(0, 0);
    }
    const double h = path.grid().step();
    s.geometric_integral[b] = cumulative_simpson(geo, h);
    s.quadrature_error = std::max(s.quadrature_error, simpson_error_estimate(geo, h));
    if (L) {
      s.dynamical[b] = cumulative_simpson(dyn, h);
      s.quadrature_error = std::max(s.quadrature_error, simpson_error_estimate(dyn, h));
    }
  }
  return s;
}

/// -int <E|dD/dt> over the whole grid, per block (NaN for degenerate blocks).
/// Throws NotCyclic when a block's right vectors do not return to their
/// initial values within `closure_tol`.
inline std::vector<Complex> abelian_cyclic_gp(const BasisPath& path,
                                              double closure_tol = kClosureTol) {
  const auto& first = path.at(0);
  const auto& last = path.at(static_cast<std::ptrdiff_t>(path.size() - 1));
  for (std::size_t b = 0; b < path.block_count(); ++b) {
    if (first.blocks[b].degeneracy() != 1) continue;
    const double gap = (last.blocks[b].right - first.blocks[b].right).norm();
    if (gap > closure_tol * std::max(1.0, first.blocks[b].right.norm())) {
      throw NotCyclic("block " + std::to_string(b) + " basis path open by " + std::to_string(gap));
    }
  }
  const PhaseSeries s = phase_series(path);
  std::vector<Complex> out;
  for (std::size_t b = 0; b < s.block_count(); ++b) out.push_back(s.geometric_integral[b].back());
  return out;
}

inline std::vector<Complex> abelian_cyclic_gp(const InvariantTrajectory& traj, const TimeGrid& grid,
                                              double tol_deg = kDefaultDegeneracyTol) {
  return abelian_cyclic_gp(invariant_path(traj, grid, tol_deg));
}

struct BlockPhase {
  Complex eigenvalue;
  Index degeneracy = 1;
  Complex geometric_integral;
  Complex ln_correction;
  Complex dynamical;
  Complex total_geometric;
};

/// Gauge-invariant open-path phase ln<E(0)|D(t)> - int <E|dD> at the end of
/// the path. Throws VanishingOverlap when a non-degenerate block's overlap
/// falls below 1e-12.
inline std::vector<BlockPhase> abelian_noncyclic_gp(const BasisPath& path, const Generator& L = {}) {
  const PhaseSeries s = phase_series(path, L);
  const std::size_t k = path.size() - 1;
  std::vector<BlockPhase> out;
  for (std::size_t b = 0; b < s.block_count(); ++b) {
    BlockPhase p;
    p.eigenvalue = s.eigenvalues[b];
    p.degeneracy = s.degeneracy[b];
    p.geometric_integral = s.geometric_integral[b][k];
    p.dynamical = L ? s.dynamical[b][k] : kNaN;
    if (p.degeneracy == 1) {
      if (std::abs(s.overlap[b][k]) < kOverlapFloor) {
        throw VanishingOverlap("block " + std::to_string(b) + " at t = " +
                               std::to_string(path.grid().time(static_cast<std::ptrdiff_t>(k))));
      }
      p.ln_correction = s.ln_correction(b, k);
      p.total_geometric = p.ln_correction + p.geometric_integral;
    } else {
      p.ln_correction = p.total_geometric = kNaN;
    }
    out.push_back(p);
  }
  return out;
}

inline std::vector<BlockPhase> abelian_noncyclic_gp(const InvariantTrajectory& traj,
                                                    const TimeGrid& grid,
                                                    double tol_deg = kDefaultDegeneracyTol) {
  return abelian_noncyclic_gp(invariant_path(traj, grid, tol_deg));
}

/// int <E|L|D> over the whole grid, per block (NaN for degenerate blocks).
inline std::vector<Complex> dynamical_phase(const BasisPath& path, const Generator& L) {
  const PhaseSeries s = phase_series(path, L);
  std::vector<Complex> out;
  for (std::size_t b = 0; b < s.block_count(); ++b) out.push_back(s.dynamical[b].back());
  return out;
}

inline std::vector<Complex> dynamical_phase(const InvariantTrajectory& traj, const Generator& L,
                                            const TimeGrid& grid,
                                            double tol_deg = kDefaultDegeneracyTol) {
  return dynamical_phase(invariant_path(traj, grid, tol_deg), L);
}

/// Index of the block whose eigenvalue is nearest to `target`.
inline std::size_t nearest_block(const std::vector<Complex>& eigenvalues, Complex target) {
  std::size_t best = 0;
  for (std::size_t b = 1; b < eigenvalues.size(); ++b) {
    if (std::abs(eigenvalues[b] - target) < std::abs(eigenvalues[best] - target)) best = b;
  }
  return best;
}

inline std::size_t nearest_block(const SpectralBasis& basis, Complex target) {
  std::vector<Complex> ev;
  for (const auto& b : basis.blocks) ev.push_back(b.eigenvalue);
  return nearest_block(ev, target);
}

// ---------------------------------------------------------------------------
// Time-ordered exponentials

namespace detail {

inline Eigen::MatrixXcd magnus4_step(const Eigen::MatrixXcd& a0, const Eigen::MatrixXcd& ah,
                                     const Eigen::MatrixXcd& a1, double h) {
  const Eigen::MatrixXcd mean = (h / 6.0) * (a0 + 4.0 * ah + a1);
  const Eigen::MatrixXcd slope = h * (a1 - a0);
  const Eigen::MatrixXcd omega = mean - (1.0 / 12.0) * commutator(mean, slope);
  return omega.exp();
}

inline Eigen::MatrixXcd magnus4_gauss(const std::function<Eigen::MatrixXcd(double)>& M, double t,
                                      double h) {
  const double off = std::sqrt(3.0) / 6.0;
  const Eigen::MatrixXcd a1 = M(t + (0.5 - off) * h);
  const Eigen::MatrixXcd a2 = M(t + (0.5 + off) * h);
  const Eigen::MatrixXcd omega = (0.5 * h) * (a1 + a2) - (std::sqrt(3.0) / 12.0) * h * h * commutator(a1, a2);
  return omega.exp();
}

inline Eigen::MatrixXcd ordered_product(const std::function<Eigen::MatrixXcd(double)>& M,
                                        const TimeGrid& grid, Index n) {
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(n, n);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    U = magnus4_gauss(M, grid.time(static_cast<std::ptrdiff_t>(k)), grid.step()) * U;
  }
  return U;
}

}  // namespace detail

/// T exp int M dt over the grid, latest factor leftmost. Each step is a
/// fourth-order Magnus exponential with Gauss nodes; the result on the
/// halved step is returned after a step-halving check against `tol`.
inline Eigen::MatrixXcd time_ordered_propagator(const std::function<Eigen::MatrixXcd(double)>& M,
                                                const TimeGrid& grid, double tol = kPropagatorTol) {
  const Index n = M(grid.start()).rows();
  const Eigen::MatrixXcd coarse = detail::ordered_product(M, grid, n);
  const Eigen::MatrixXcd fine = detail::ordered_product(M, grid.refined(), n);
  const double diff = max_abs(fine - coarse);
  if (diff > tol * std::max(1.0, max_abs(fine))) {
    throw StepTooLarge("time_ordered_propagator: step halving changed the result by " +
                       std::to_string(diff));
  }
  return fine;
}

/// Running T exp of uniformly sampled M: entry k propagates from t_0 to t_k.
/// Interval midpoints come from cubic interpolation of the samples.
inline std::vector<Eigen::MatrixXcd> propagator_series(const std::vector<Eigen::MatrixXcd>& M,
                                                       double h) {
  std::vector<Eigen::MatrixXcd> out;
  if (M.empty()) return out;
  const Index n = M.front().rows();
  out.push_back(Eigen::MatrixXcd::Identity(n, n));
  const std::size_t last = M.size() - 1;
  for (std::size_t k = 1; k <= last; ++k) {
    Eigen::MatrixXcd mid;
    if (last < 3) {
      mid = 0.5 * (M[k - 1] + M[k]);
    } else if (k == 1) {
      mid = (5.0 * M[0] + 15.0 * M[1] - 5.0 * M[2] + M[3]) / 16.0;
    } else if (k == last) {
      mid = (M[k - 3] - 5.0 * M[k - 2] + 15.0 * M[k - 1] + 5.0 * M[k]) / 16.0;
    } else {
      mid = (-M[k - 2] + 9.0 * M[k - 1] + 9.0 * M[k] - M[k + 1]) / 16.0;
    }
    out.push_back(detail::magnus4_step(M[k - 1], mid, M[k], h) * out.back());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-Abelian phases

struct NonAbelianPhase {
  Eigen::MatrixXcd overlap;     // W(ij) = <E(i)(0)|D(j)(t)>
  Eigen::MatrixXcd texp_A;      // T exp int A
  Eigen::MatrixXcd exp_phi;     // W T exp int A
  Eigen::MatrixXcd propagator;  // T exp int (H + A)
  Eigen::MatrixXcd int_A;
  Eigen::MatrixXcd int_H;
  double commutator_norm = 0.0;  // |[int A, int H]|_F
  bool advisory = false;         // factorization not justified
};

/// Non-Abelian phase of `block` from the start of the path to grid index k
/// (default: the end).
inline NonAbelianPhase nonabelian_gp(const BasisPath& path, const Generator& L, std::size_t block,
                                     std::optional<std::size_t> k_end = std::nullopt,
                                     double advisory_tol = kAdvisoryTol) {
  const std::size_t kend = k_end.value_or(path.size() - 1);
  std::vector<Eigen::MatrixXcd> As, Ms;
  std::vector<Eigen::MatrixXcd> Hs;
  for (std::size_t k = 0; k <= kend; ++k) {
    BlockMatrices bm = nonabelian_matrices(path, L, k, block);
    As.push_back(std::move(bm.A));
    Hs.push_back(std::move(bm.H));
    Ms.push_back(std::move(bm.M));
  }
  const double h = path.grid().step();
  NonAbelianPhase out;
  out.overlap = path.at(0).blocks[block].left *
                path.at(static_cast<std::ptrdiff_t>(kend)).blocks[block].right;
  out.texp_A = propagator_series(As, h).back();
  out.propagator = propagator_series(Ms, h).back();
  out.exp_phi = out.overlap * out.texp_A;
  out.int_A = cumulative_simpson(As, h).back();
  out.int_H = cumulative_simpson(Hs, h).back();
  out.commutator_norm = commutator(out.int_A, out.int_H).norm();
  out.advisory = out.commutator_norm > advisory_tol;
  return out;
}

/// Predicted coefficients c(t_k) in the member ordering of the path, from
/// c(0) = c0. Non-degenerate blocks pick up exp(G + K); degenerate blocks
/// are propagated by T exp int (H + A).
inline std::vector<Eigen::VectorXcd> coefficient_evolution(const BasisPath& path,
                                                           const Generator& L,
                                                           const Eigen::VectorXcd& c0) {
  if (c0.size() != path.dim()) throw DimensionMismatch("coefficient_evolution: c0 size");
  const std::size_t n = path.size();
  std::vector<Eigen::VectorXcd> out(n, Eigen::VectorXcd::Zero(path.dim()));
  const PhaseSeries s = phase_series(path, L);
  const auto& first = path.at(0);
  for (std::size_t b = 0; b < path.block_count(); ++b) {
    const Index off = first.member_offset(b);
    const Index N = first.blocks[b].degeneracy();
    if (N == 1) {
      for (std::size_t k = 0; k < n; ++k) {
        out[k](off) = c0(off) * std::exp(s.geometric_integral[b][k] + s.dynamical[b][k]);
      }
    } else {
      std::vector<Eigen::MatrixXcd> Ms;
      for (std::size_t k = 0; k < n; ++k) Ms.push_back(nonabelian_matrices(path, L, k, b).M);
      const auto U = propagator_series(Ms, path.grid().step());
      for (std::size_t k = 0; k < n; ++k) out[k].segment(off, N) = U[k] * c0.segment(off, N);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference values and limits

/// Cyclic phases of the two dephasing-family blocks from the closed form
/// -2 pi (c2 k1 + 2 k2 sqrt(-(k1/k3)^2)) / (k1 k3), principal square roots.
inline std::pair<Complex, Complex> closed_form_dephasing_gp(double alpha1, double alpha2,
                                                            double c2) {
  const DephasingParams p{alpha1, alpha2, 0.0, c2, 1.0};
  validate(p);
  const double k1 = p.k1();
  if (std::abs(k1) <= 1e-12 * std::max(1.0, std::abs(alpha2) + std::abs(c2))) {
    throw VanishingK1("2 alpha2 + c2 = 0");
  }
  const Complex k3 = p.k3();
  Complex w = -(k1 / k3) * (k1 / k3);
  if (w.imag() == 0.0) w.imag(0.0);  // drop a signed zero: principal root of a negative real is +i
  const Complex r = std::sqrt(w);
  const Complex phi1 = -kTwoPi * (c2 * k1 + 2.0 * p.k2() * r) / (k1 * k3);
  return {phi1, -phi1};
}

/// max over eigenvectors v of I (unit norm) of min over eigenvalues mu of L
/// of |L v - mu v|: small when I and L share an eigenbasis.
inline double adiabatic_check(const SuperOperator& L, const SuperOperator& I,
                              double tol_deg = kDefaultDegeneracyTol) {
  const SpectralBasis bi = decompose(I, tol_deg);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(L, false);
  double worst = 0.0;
  for (const auto& b : bi.blocks) {
    for (Index c = 0; c < b.right.cols(); ++c) {
      const Eigen::VectorXcd v = b.right.col(c).normalized();
      const Eigen::VectorXcd Lv = L * v;
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < es.eigenvalues().size(); ++j) {
        best = std::min(best, (Lv - es.eigenvalues()(j) * v).norm());
      }
      worst = std::max(worst, best);
    }
  }
  return worst;
}

/// max_t |dI/dt| / |I| over the grid.
inline double adiabaticity(const InvariantTrajectory& traj, const TimeGrid& grid) {
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.time(static_cast<std::ptrdiff_t>(k));
    worst = std::max(worst, traj.derivative(t).norm() / std::max(traj.value(t).norm(), 1e-300));
  }
  return worst;
}

}  // namespace dynphase
