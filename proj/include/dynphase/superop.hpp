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

// Hilbert-Schmidt representation of a driven two-level system with a single
// decoherence channel Gamma = a1 sx + a2 sy + a3 sz and H = (omega / 2) sz.
//
// Rows and columns follow the basis order (I, sx, sy, sz).

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "dynphase/core.hpp"

namespace dynphase {

enum class ChannelKind { dephasing, spontaneous_emission, bit_flip, custom };

inline std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::dephasing: return "dephasing";
    case ChannelKind::spontaneous_emission: return "spontaneous_emission";
    case ChannelKind::bit_flip: return "bit_flip";
    case ChannelKind::custom: return "custom";
  }
  return "custom";
}

struct DecoherenceChannel {
  double omega = 1.0;
  std::array<Complex, 3> alpha{};
  ChannelKind kind = ChannelKind::custom;

  /// Gamma = gamma_d sz.
  static DecoherenceChannel dephasing(double omega, double gamma_d) {
    require_rate(gamma_d);
    return {omega, {Complex{}, Complex{}, Complex{gamma_d}}, ChannelKind::dephasing};
  }

  /// Gamma = gamma_se (sx - i sy).
  static DecoherenceChannel spontaneous_emission(double omega, double gamma_se) {
    require_rate(gamma_se);
    return {omega, {Complex{gamma_se}, -kI * gamma_se, Complex{}},
            ChannelKind::spontaneous_emission};
  }

  /// Gamma = gamma_b sx.
  static DecoherenceChannel bit_flip(double omega, double gamma_b) {
    require_rate(gamma_b);
    return {omega, {Complex{gamma_b}, Complex{}, Complex{}}, ChannelKind::bit_flip};
  }

  static DecoherenceChannel custom(double omega, std::array<Complex, 3> alpha) {
    return {omega, alpha, ChannelKind::custom};
  }

  /// Same channel family with a different rate parameter. Custom channels
  /// scale all coefficients uniformly.
  DecoherenceChannel with_rate(double gamma) const {
    switch (kind) {
      case ChannelKind::dephasing: return dephasing(omega, gamma);
      case ChannelKind::spontaneous_emission: return spontaneous_emission(omega, gamma);
      case ChannelKind::bit_flip: return bit_flip(omega, gamma);
      case ChannelKind::custom: break;
    }
    DecoherenceChannel c = *this;
    for (auto& a : c.alpha) a *= gamma;
    return c;
  }

 private:
  static void require_rate(double g) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw InvalidInput("decoherence rate must be finite and >= 0");
    }
  }
};

/// Lindblad super-operator in the (I, sx, sy, sz) basis. Entries follow the
/// closed form obtained by expanding the dissipator in Pauli components, with
/// the coefficient convention under which the spontaneous-emission preset
/// pumps towards c3 = +1 (the first column is the conjugate-coefficient
/// dissipator; the remaining columns are convention independent).
inline SuperOperator build_lindblad(const DecoherenceChannel& channel) {
  const double w = channel.omega;
  const auto& a = channel.alpha;
  for (const auto& ai : a) {
    if (!std::isfinite(ai.real()) || !std::isfinite(ai.imag()) || !std::isfinite(w)) {
      throw InvalidInput("build_lindblad: channel coefficients must be finite");
    }
  }
  auto sym = [&](int i, int j) {  // a_i^* a_j + a_i a_j^*
    return std::conj(a[i]) * a[j] + a[i] * std::conj(a[j]);
  };
  auto pump = [&](int i, int j) {  // 2i (a_i^* a_j - a_i a_j^*)
    return 2.0 * kI * (std::conj(a[i]) * a[j] - a[i] * std::conj(a[j]));
  };
  auto sq = [&](int i) { return std::norm(a[i]); };

  SuperOperator L = SuperOperator::Zero(4, 4);
  L(1, 0) = pump(1, 2);
  L(1, 1) = -2.0 * (sq(1) + sq(2));
  L(1, 2) = -w + sym(0, 1);
  L(1, 3) = sym(0, 2);

  L(2, 0) = -pump(0, 2);
  L(2, 1) = w + sym(0, 1);
  L(2, 2) = -2.0 * (sq(0) + sq(2));
  L(2, 3) = sym(1, 2);

  L(3, 0) = pump(0, 1);
  L(3, 1) = sym(0, 2);
  L(3, 2) = sym(1, 2);
  L(3, 3) = -2.0 * (sq(0) + sq(1));
  return L;
}

/// Generator t -> L for a time-independent channel.
inline Generator lindblad_generator(const DecoherenceChannel& channel) {
  return constant_generator(build_lindblad(channel));
}

inline constexpr double kBlockDecouplingTol = 1e-12;

/// The 2x2 block acting on (c1, c2). Fails when rows/columns 1-2 couple to
/// 0 or 3 beyond `tol`.
inline SuperOperator extract_internal_block(const SuperOperator& L,
                                            double tol = kBlockDecouplingTol) {
  if (L.rows() != 4 || L.cols() != 4) {
    throw DimensionMismatch("extract_internal_block expects a 4x4 super-operator");
  }
  double coupling = 0.0;
  for (int inner : {1, 2}) {
    for (int outer : {0, 3}) {
      coupling = std::max({coupling, std::abs(L(inner, outer)), std::abs(L(outer, inner))});
    }
  }
  if (coupling > tol) {
    throw NotBlockDecoupled("(sx, sy) subspace couples to (I, sz) with magnitude " +
                            std::to_string(coupling));
  }
  return L.block(1, 1, 2, 2);
}

inline HSVector apply_generator(const SuperOperator& L, const HSVector& rho) {
  if (L.cols() != rho.size()) {
    throw DimensionMismatch("apply_generator: " + std::to_string(L.cols()) +
                            " columns vs vector of size " + std::to_string(rho.size()));
  }
  return L * rho;
}

/// Physical state with Bloch vector (v1, v2, v3).
inline HSVector bloch_state(double v1, double v2, double v3) {
  HSVector rho(4);
  rho << 1.0, v1, v2, v3;
  return rho;
}

inline double bloch_length_squared(const HSVector& rho) {
  return std::norm(rho(1)) + std::norm(rho(2)) + std::norm(rho(3));
}

}  // namespace dynphase
