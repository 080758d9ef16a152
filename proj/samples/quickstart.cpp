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

// Phases of a dephasing qubit and a bit-flip qubit in the eigenbasis of a
// dynamical invariant, checked against direct master-equation integration.

#include <cstdio>

#include "dynphase/dynphase.hpp"

using namespace dynphase;

int main() {
  const double omega = 1.0;
  const TimeGrid period = TimeGrid::over(0.0, kTwoPi / omega, 1e-3);

  // Dephasing: 2x2 internal block, rotating invariant.
  const auto dephasing = DecoherenceChannel::dephasing(omega, 0.3);
  const Generator L2 = constant_generator(extract_internal_block(build_lindblad(dephasing)));
  const auto inv2 = dephasing_family(1.0, 0.5, 0.0, 0.2, omega);
  const BasisPath path2 = invariant_path(inv2, period);
  const auto geo = abelian_cyclic_gp(path2);
  const auto dyn = dynamical_phase(path2, L2);
  for (std::size_t b = 0; b < geo.size(); ++b) {
    const Complex lam = path2.at(0).blocks[b].eigenvalue;
    std::printf("dephasing block %zu (lambda=%+.4f%+.4fi): geometric %+.6f%+.6fi  dynamical %+.6f%+.6fi\n", b,
                lam.real(), lam.imag(), geo[b].real(), geo[b].imag(), dyn[b].real(), dyn[b].imag());
  }

  // Bit-flip: open-path, gauge-invariant phase of the alpha1 - sqrt(eps1 eps2) block.
  const auto bitflip = DecoherenceChannel::bit_flip(omega, 0.1);
  const Generator L4 = lindblad_generator(bitflip);
  const auto inv4 = bitflip_family(0.0, -0.5, 1.0, omega, 0.1);
  const BasisPath path4 = invariant_path(inv4, period);
  const auto open = abelian_noncyclic_gp(path4, L4);
  const std::size_t b = nearest_block(path4.at(0), Complex(0.0, -std::sqrt(0.5)));
  std::printf("bit-flip phi(T) = %+.8f%+.8fi\n", open[b].total_geometric.real(), open[b].total_geometric.imag());

  // Independent check: integrate the master equation and project.
  StateTrajectory st = integrate_master(L4, bloch_state(0.3, -0.2, 0.5), period);
  const auto direct = expand_in_invariant_basis(st, path4);
  const auto predicted = coefficient_evolution(path4, L4, direct.front());
  std::printf("max relative coefficient error vs. direct integration: %.3e\n", oracle_compare(direct, predicted));
  return 0;
}
