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

// Decoherence robustness: if [L(gamma), I(t)] does not depend on gamma, an
// invariant (and its phases) independent of gamma exists.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dynphase/core.hpp"
#include "dynphase/invariant.hpp"
#include "dynphase/phase.hpp"
#include "dynphase/superop.hpp"

namespace dynphase {

inline constexpr double kIndependenceTol = 1e-12;
inline constexpr double kRobustPhaseTol = 1e-8;

/// Generator family indexed by the decoherence rate.
using GeneratorFamily = std::function<Generator(double)>;

struct IndependenceResult {
  bool independent = true;
  double max_spread = 0.0;
};

/// Entrywise spread of [L(gamma), I(t)] over the rate grid, maximized over
/// the time grid. Independent when the spread stays below 1e-12.
inline IndependenceResult commutator_independence(const GeneratorFamily& family,
                                                  const InvariantTrajectory& traj,
                                                  const std::vector<double>& gammas,
                                                  const TimeGrid& grid,
                                                  double tol = kIndependenceTol) {
  IndependenceResult out;
  std::vector<Generator> gens;
  for (double g : gammas) gens.push_back(family(g));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.time(static_cast<std::ptrdiff_t>(k));
    const SuperOperator I = traj.value(t);
    std::vector<SuperOperator> comm;
    for (const auto& L : gens) comm.push_back(invariant_rhs(L(t), I));
    for (std::size_t i = 0; i < comm.size(); ++i) {
      for (std::size_t j = i + 1; j < comm.size(); ++j) {
        out.max_spread = std::max(out.max_spread, max_abs(comm[i] - comm[j]));
      }
    }
  }
  out.independent = out.max_spread < tol;
  return out;
}

/// Generator family of a preset channel; `internal_block` restricts to the
/// 2x2 (sx, sy) block.
inline GeneratorFamily channel_family(const DecoherenceChannel& channel, bool internal_block = false) {
  return [channel, internal_block](double gamma) -> Generator {
    const SuperOperator L = build_lindblad(channel.with_rate(gamma));
    return constant_generator(internal_block ? extract_internal_block(L) : L);
  };
}

enum class PhaseKind { cyclic, noncyclic, nonabelian };

struct SweepScenario {
  std::string label;
  GeneratorFamily generator;
  /// Invariant at a given rate; robustness requires it to ignore the rate.
  std::function<InvariantTrajectory(double)> invariant;
  TimeGrid grid;
  PhaseKind kind = PhaseKind::cyclic;
  double tol_deg = kDefaultDegeneracyTol;
};

struct RobustnessReport {
  std::string label;
  std::vector<double> gammas;
  bool commutator_independent = false;
  double commutator_spread = 0.0;
  std::vector<Complex> eigenvalues;                    // blocks at the first rate
  std::vector<std::vector<Complex>> geometric;         // [gamma][block]
  std::vector<std::vector<Complex>> dynamical;         // [gamma][block]
  std::vector<double> phase_spread;                    // per block
  std::vector<double> dynamical_spread;                // per block
  std::vector<bool> phase_robust;
  std::vector<bool> dynamical_robust;
};

namespace detail {

inline std::vector<double> spread_per_block(const std::vector<std::vector<Complex>>& v) {
  if (v.empty()) return {};
  std::vector<double> out(v.front().size(), 0.0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        out[b] = std::max(out[b], std::abs(v[i][b] - v[j][b]));
      }
    }
  }
  return out;
}

}  // namespace detail

/// Runs invariant -> basis path -> phases at every rate and compares.
/// Geometric phases are the cyclic integral or the gauge-invariant open-path
/// phase depending on `kind`; non-Abelian sweeps report the Abelian values
/// of non-degenerate blocks.
inline RobustnessReport phase_sweep(const SweepScenario& sc, const std::vector<double>& gammas) {
  if (gammas.empty()) throw InvalidInput("phase_sweep: empty rate grid");
  RobustnessReport r;
  r.label = sc.label;
  r.gammas = gammas;
  const auto ind = commutator_independence(sc.generator, sc.invariant(gammas.front()), gammas, sc.grid);
  r.commutator_independent = ind.independent;
  r.commutator_spread = ind.max_spread;

  for (double g : gammas) {
    const Generator L = sc.generator(g);
    const BasisPath path = invariant_path(sc.invariant(g), sc.grid, sc.tol_deg);
    std::vector<Complex> geo;
    if (sc.kind == PhaseKind::cyclic) {
      geo = abelian_cyclic_gp(path);
    } else {
      for (const auto& p : abelian_noncyclic_gp(path)) geo.push_back(p.total_geometric);
    }
    if (r.eigenvalues.empty()) {
      for (const auto& b : path.at(0).blocks) r.eigenvalues.push_back(b.eigenvalue);
    }
    if (geo.size() != r.eigenvalues.size()) {
      throw AmbiguousMatching("phase_sweep: block structure changed across the rate grid");
    }
    r.geometric.push_back(std::move(geo));
    r.dynamical.push_back(dynamical_phase(path, L));
  }
  r.phase_spread = detail::spread_per_block(r.geometric);
  r.dynamical_spread = detail::spread_per_block(r.dynamical);
  for (double s : r.phase_spread) r.phase_robust.push_back(!(s >= kRobustPhaseTol));
  for (double s : r.dynamical_spread) r.dynamical_robust.push_back(!(s >= kRobustPhaseTol));
  return r;
}

}  // namespace dynphase
