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

// Direct integration of d rho / dt = L rho and projection onto the
// instantaneous invariant basis. Shares no quadrature with phase.hpp.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dynphase/core.hpp"
#include "dynphase/spectral.hpp"

namespace dynphase {

inline constexpr double kMasterTolerance = 1e-9;
inline constexpr double kRelativeFloor = 1e-12;

struct StateTrajectory {
  TimeGrid grid;
  std::vector<HSVector> states;
  std::vector<Eigen::VectorXcd> coefficients;  // filled by expand_in_invariant_basis
};

namespace detail {

inline std::vector<HSVector> rk4_master(const Generator& L, const HSVector& rho0, double t0,
                                        double h, std::size_t n, int substeps) {
  std::vector<HSVector> out;
  out.reserve(n + 1);
  out.push_back(rho0);
  HSVector r = rho0;
  const double hs = h / substeps;
  for (std::size_t k = 0; k < n; ++k) {
    for (int s = 0; s < substeps; ++s) {
      const double t = t0 + h * static_cast<double>(k) + hs * s;
      const SuperOperator Lm = L(t + 0.5 * hs);
      const HSVector k1 = L(t) * r;
      const HSVector k2 = Lm * (r + 0.5 * hs * k1);
      const HSVector k3 = Lm * (r + 0.5 * hs * k2);
      const HSVector k4 = L(t + hs) * (r + hs * k3);
      r += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace detail

/// RK4 on the grid with one step-halving check; the half-step solution is
/// returned. StepTooLarge when the two endpoints differ by more than
/// 1e-9 per unit time.
inline StateTrajectory integrate_master(const Generator& L, const HSVector& rho0,
                                        const TimeGrid& grid,
                                        double tol_per_time = kMasterTolerance) {
  if (L(grid.start()).cols() != rho0.size()) {
    throw DimensionMismatch("integrate_master: generator and state dimensions differ");
  }
  const auto coarse = detail::rk4_master(L, rho0, grid.start(), grid.step(), grid.steps(), 1);
  auto fine = detail::rk4_master(L, rho0, grid.start(), grid.step(), grid.steps(), 2);
  const double diff = (coarse.back() - fine.back()).norm();
  const double span = std::max(grid.end() - grid.start(), 1.0);
  if (diff > tol_per_time * span * std::max(1.0, rho0.norm())) {
    throw StepTooLarge("integrate_master: step halving moved the endpoint by " +
                       std::to_string(diff));
  }
  StateTrajectory out;
  out.grid = grid;
  out.states = std::move(fine);
  return out;
}

/// c(t_k) = E(t_k) rho(t_k) in the member ordering of the path.
inline std::vector<Eigen::VectorXcd> expand_in_invariant_basis(StateTrajectory& traj,
                                                               const BasisPath& path) {
  if (traj.states.size() != path.size()) {
    throw DimensionMismatch("expand_in_invariant_basis: " + std::to_string(traj.states.size()) +
                            " states vs " + std::to_string(path.size()) + " basis samples");
  }
  if (!traj.states.empty() && traj.states.front().size() != path.dim()) {
    throw DimensionMismatch("expand_in_invariant_basis: state and basis dimensions differ");
  }
  traj.coefficients.clear();
  for (std::size_t k = 0; k < path.size(); ++k) {
    traj.coefficients.push_back(path.at(static_cast<std::ptrdiff_t>(k)).left_matrix() *
                                traj.states[k]);
  }
  return traj.coefficients;
}

/// max_k |sum_b c_b(t_k) D_b(t_k) - rho(t_k)|.
inline double reconstruction_residual(const StateTrajectory& traj, const BasisPath& path) {
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.coefficients.size(); ++k) {
    const Eigen::VectorXcd r =
        path.at(static_cast<std::ptrdiff_t>(k)).right_matrix() * traj.coefficients[k];
    worst = std::max(worst, (r - traj.states[k]).norm());
  }
  return worst;
}

/// max over samples and members of |direct - predicted| / max(|direct|, floor).
inline double oracle_compare(const std::vector<Eigen::VectorXcd>& direct,
                             const std::vector<Eigen::VectorXcd>& predicted,
                             double floor = kRelativeFloor) {
  if (direct.size() != predicted.size()) {
    throw DimensionMismatch("oracle_compare: sample counts differ");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < direct.size(); ++k) {
    if (direct[k].size() != predicted[k].size()) {
      throw DimensionMismatch("oracle_compare: coefficient counts differ");
    }
    for (Index i = 0; i < direct[k].size(); ++i) {
      const double scale = std::max(std::abs(direct[k](i)), floor);
      worst = std::max(worst, std::abs(direct[k](i) - predicted[k](i)) / scale);
    }
  }
  return worst;
}

}  // namespace dynphase
