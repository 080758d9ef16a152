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

// Dynamical invariants: super-operators I(t) with dI/dt = [L(t), I(t)].
// Closed-form families for the three preset channels and a generic RK4
// solver starting from a user supplied I(0).

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynphase/core.hpp"
#include "dynphase/spectral.hpp"

namespace dynphase {

struct InvariantTrajectory {
  std::function<SuperOperator(double)> value;
  std::function<SuperOperator(double)> derivative;
  std::string description;
  Index dim = 0;
  bool analytic = false;
};

/// [L, I] = L I - I L.
inline SuperOperator invariant_rhs(const SuperOperator& L, const SuperOperator& I) {
  if (L.rows() != I.rows() || L.cols() != I.cols() || L.rows() != L.cols()) {
    throw DimensionMismatch("invariant_rhs: L is " + std::to_string(L.rows()) + "x" +
                            std::to_string(L.cols()) + ", I is " + std::to_string(I.rows()) +
                            "x" + std::to_string(I.cols()));
  }
  return commutator(L, I);
}

// ---------------------------------------------------------------------------
// Closed-form families

struct DephasingParams {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double omega = 1.0;

  double k1() const { return 2.0 * alpha2 + c2; }
  double k2() const { return alpha1 * alpha1 + alpha2 * alpha2; }
  /// sqrt(4 k2 - c2^2); imaginary when the eigenvalues are complex.
  Complex k3() const { return std::sqrt(Complex(4.0 * k2() - c2 * c2)); }
};

inline void validate(const DephasingParams& p) {
  for (double v : {p.alpha1, p.alpha2, p.c1, p.c2, p.omega}) {
    if (!std::isfinite(v)) throw InvalidInput("dephasing family: parameters must be finite");
  }
  const double lhs = 4.0 * p.k2();
  const double rhs = p.c2 * p.c2;
  if (std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, lhs + rhs)) {
    throw DegenerateFamily("4(alpha1^2 + alpha2^2) = c2^2: the invariant has no eigenbasis");
  }
}

namespace detail {

inline Eigen::Matrix2cd dephasing_block(const DephasingParams& p, double t) {
  const double s = std::sin(2.0 * p.omega * t);
  const double c = std::cos(2.0 * p.omega * t);
  const double a = p.alpha1 * c + p.alpha2 * s + 0.5 * p.c1;
  const double b = p.alpha1 * s - p.alpha2 * c - 0.5 * p.c2;
  Eigen::Matrix2cd m;
  m << a, b, b + p.c2, -a + p.c1;
  return m;
}

inline Eigen::Matrix2cd dephasing_block_derivative(const DephasingParams& p, double t) {
  const double w2 = 2.0 * p.omega;
  const double s = std::sin(w2 * t);
  const double c = std::cos(w2 * t);
  const double da = w2 * (-p.alpha1 * s + p.alpha2 * c);
  const double db = w2 * (p.alpha1 * c + p.alpha2 * s);
  Eigen::Matrix2cd m;
  m << da, db, db, -da;
  return m;
}

inline std::string describe(const char* name, std::initializer_list<std::pair<const char*, double>> kv) {
  std::ostringstream os;
  os.precision(17);
  os << name << '(';
  bool first = true;
  for (const auto& [k, v] : kv) {
    os << (first ? "" : ", ") << k << '=' << v;
    first = false;
  }
  os << ')';
  return os.str();
}

}  // namespace detail

/// 2x2 invariant of the dephasing internal block:
/// [[a, b], [b + c2, -a + c1]] with a, b rotating at 2 omega.
inline InvariantTrajectory dephasing_family(const DephasingParams& p) {
  validate(p);
  InvariantTrajectory traj;
  traj.value = [p](double t) -> SuperOperator { return detail::dephasing_block(p, t); };
  traj.derivative = [p](double t) -> SuperOperator {
    return detail::dephasing_block_derivative(p, t);
  };
  traj.description = detail::describe("dephasing_family", {{"alpha1", p.alpha1},
                                                           {"alpha2", p.alpha2},
                                                           {"c1", p.c1},
                                                           {"c2", p.c2},
                                                           {"omega", p.omega}});
  traj.dim = 2;
  traj.analytic = true;
  return traj;
}

inline InvariantTrajectory dephasing_family(double alpha1, double alpha2, double c1, double c2,
                                            double omega) {
  return dephasing_family(DephasingParams{alpha1, alpha2, c1, c2, omega});
}

/// 4x4 invariant for spontaneous emission: the dephasing family on the
/// (sx, sy) block, constant outer block [[q, 0], [x, q - x]] on (I, sz).
/// Also an invariant of the 4x4 dephasing generator.
inline InvariantTrajectory se_family(const DephasingParams& p, double q, double x) {
  validate(p);
  if (!std::isfinite(q) || !std::isfinite(x)) {
    throw InvalidInput("se_family: q and x must be finite");
  }
  const double y = q - x;
  InvariantTrajectory traj;
  traj.value = [p, q, x, y](double t) -> SuperOperator {
    SuperOperator m = SuperOperator::Zero(4, 4);
    m(0, 0) = q;
    m(3, 0) = x;
    m(3, 3) = y;
    m.block(1, 1, 2, 2) = detail::dephasing_block(p, t);
    return m;
  };
  traj.derivative = [p](double t) -> SuperOperator {
    SuperOperator m = SuperOperator::Zero(4, 4);
    m.block(1, 1, 2, 2) = detail::dephasing_block_derivative(p, t);
    return m;
  };
  traj.description = detail::describe("se_family", {{"alpha1", p.alpha1},
                                                    {"alpha2", p.alpha2},
                                                    {"c1", p.c1},
                                                    {"c2", p.c2},
                                                    {"omega", p.omega},
                                                    {"q", q},
                                                    {"x", x}});
  traj.dim = 4;
  traj.analytic = true;
  return traj;
}

struct BitFlipParams {
  double alpha1 = 0.0;
  double eps1 = -0.5;
  double eps2 = 1.0;
  double omega = 1.0;
  double gamma_b = 0.1;
  /// Defaults to 2 alpha1 (sigma1 = 0).
  std::optional<double> c1;

  Complex xi() const {
    const double g2 = gamma_b * gamma_b;
    return std::sqrt(Complex(g2 * g2 - omega * omega));
  }
  double c1_value() const { return c1.value_or(2.0 * alpha1); }
  /// From gamma_b^2 sigma1 + omega (2 alpha1 - c1) = 0.
  double sigma1() const {
    const double g2 = gamma_b * gamma_b;
    const double r = omega * (c1_value() - 2.0 * alpha1);
    return r == 0.0 ? 0.0 : r / g2;
  }
  /// The two non-trivial eigenvalues alpha1 -+ sqrt(eps1 eps2).
  std::pair<Complex, Complex> eigenvalues() const {
    const Complex r = std::sqrt(Complex(eps1 * eps2));
    return {alpha1 - r, alpha1 + r};
  }
};

inline void validate(const BitFlipParams& p) {
  for (double v : {p.alpha1, p.eps1, p.eps2, p.omega, p.gamma_b, p.c1_value()}) {
    if (!std::isfinite(v)) throw InvalidInput("bit-flip family: parameters must be finite");
  }
  const double g2 = p.gamma_b * p.gamma_b;
  if (std::abs(g2 * g2 - p.omega * p.omega) <= 1e-12 * std::max(1.0, p.omega * p.omega)) {
    throw SingularXi("gamma_b^4 = omega^2");
  }
  if (g2 == 0.0 && p.c1_value() != 2.0 * p.alpha1) {
    throw InvalidInput("bit-flip family: gamma_b = 0 requires c1 = 2 alpha1");
  }
}

namespace detail {

inline Eigen::Matrix2cd bitflip_block(const BitFlipParams& p, double t, bool derivative) {
  const Complex xi = p.xi();
  const double g2 = p.gamma_b * p.gamma_b;
  const double w = p.omega;
  const Complex ep = p.eps1 * std::exp(2.0 * xi * t);
  const Complex em = p.eps2 * std::exp(-2.0 * xi * t);
  Complex a, e, s;
  if (!derivative) {
    a = w * (-ep + em) / (2.0 * xi) + p.alpha1;
    e = ep + em;
    s = g2 * (ep - em) / xi + p.sigma1();
  } else {
    a = -w * (ep + em);
    e = 2.0 * xi * (ep - em);
    s = 2.0 * g2 * (ep + em);
  }
  const Complex d = derivative ? -a : -a + p.c1_value();
  Eigen::Matrix2cd m;
  m << a, 0.5 * (e + s), 0.5 * (e - s), d;
  return m;
}

}  // namespace detail

/// 4x4 invariant of the bit-flip generator with zero outer block; the inner
/// block evolves through exp(+-2 xi t), xi = sqrt(gamma_b^4 - omega^2)
/// complex for gamma_b^2 < omega.
inline InvariantTrajectory bitflip_family(const BitFlipParams& p) {
  validate(p);
  InvariantTrajectory traj;
  traj.value = [p](double t) -> SuperOperator {
    SuperOperator m = SuperOperator::Zero(4, 4);
    m.block(1, 1, 2, 2) = detail::bitflip_block(p, t, false);
    return m;
  };
  traj.derivative = [p](double t) -> SuperOperator {
    SuperOperator m = SuperOperator::Zero(4, 4);
    m.block(1, 1, 2, 2) = detail::bitflip_block(p, t, true);
    return m;
  };
  traj.description = detail::describe("bitflip_family", {{"alpha1", p.alpha1},
                                                         {"eps1", p.eps1},
                                                         {"eps2", p.eps2},
                                                         {"omega", p.omega},
                                                         {"gamma_b", p.gamma_b},
                                                         {"c1", p.c1_value()}});
  traj.dim = 4;
  traj.analytic = true;
  return traj;
}

inline InvariantTrajectory bitflip_family(double alpha1, double eps1, double eps2, double omega,
                                          double gamma_b) {
  return bitflip_family(BitFlipParams{alpha1, eps1, eps2, omega, gamma_b, std::nullopt});
}

// ---------------------------------------------------------------------------
// Numerical solver

inline constexpr double kInvariantTolerance = 1e-8;

namespace detail {

inline SuperOperator rk4_commutator_step(const Generator& L, const SuperOperator& I, double t,
                                         double h) {
  const SuperOperator Lh = L(t + 0.5 * h);
  const SuperOperator k1 = commutator(L(t), I);
  const SuperOperator k2 = commutator(Lh, I + 0.5 * h * k1);
  const SuperOperator k3 = commutator(Lh, I + 0.5 * h * k2);
  const SuperOperator k4 = commutator(L(t + h), I + h * k3);
  return I + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Samples of I at t0 + k h, k = 0..n, integrating with `substeps` RK4 steps
// per sample interval (h may be negative).
inline std::vector<SuperOperator> integrate_commutator(const Generator& L, const SuperOperator& I0,
                                                       double t0, double h, std::size_t n,
                                                       int substeps) {
  std::vector<SuperOperator> out;
  out.reserve(n + 1);
  out.push_back(I0);
  SuperOperator I = I0;
  const double hs = h / substeps;
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = t0 + h * static_cast<double>(k);
    for (int s = 0; s < substeps; ++s) I = rk4_commutator_step(L, I, tk + hs * s, hs);
    out.push_back(I);
  }
  return out;
}

// Uniform samples with cubic Hermite interpolation between them.
struct HermiteTable {
  double t0 = 0.0;
  double h = 1.0;
  std::vector<SuperOperator> values;
  std::vector<SuperOperator> slopes;

  std::pair<std::size_t, double> locate(double t) const {
    const double u = (t - t0) / h;
    const auto last = static_cast<double>(values.size() - 1);
    if (u < -1e-9 || u > last + 1e-9) {
      throw InvalidInput("invariant trajectory evaluated outside its solved range");
    }
    auto k = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, last - 1.0));
    return {k, std::clamp(u - static_cast<double>(k), 0.0, 1.0)};
  }

  SuperOperator value(double t) const {
    const auto [k, s] = locate(t);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * values[k] + (s3 - 2 * s2 + s) * h * slopes[k] +
           (-2 * s3 + 3 * s2) * values[k + 1] + (s3 - s2) * h * slopes[k + 1];
  }

  SuperOperator derivative(double t) const {
    const auto [k, s] = locate(t);
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * values[k] + (-6 * s2 + 6 * s) * values[k + 1]) / h +
           (3 * s2 - 4 * s + 1) * slopes[k] + (3 * s2 - 2 * s) * slopes[k + 1];
  }
};

}  // namespace detail

/// Guard span integrated beyond each end of the grid so that basis tracking
/// can difference across the endpoints.
inline constexpr std::size_t kSolverGuardSteps = 8;

/// RK4 integration of dI/dt = [L(t), I] on `grid` (step = grid.step()).
/// Samples are joined by cubic Hermite interpolation whose nodal slopes are
/// five-point differences of the samples; the returned derivative is that of
/// the interpolant and never consults L.
///
/// Throws StepTooLarge when halving the step moves the endpoint by more than
/// 10 x 1e-8 |I0| T.
inline InvariantTrajectory solve_invariant(const Generator& L, const SuperOperator& I0,
                                           const TimeGrid& grid,
                                           double tolerance = kInvariantTolerance) {
  if (I0.rows() != I0.cols() || I0.rows() == 0) {
    throw DimensionMismatch("solve_invariant: I0 must be square");
  }
  if (!I0.allFinite()) throw InvalidInput("solve_invariant: I0 has non-finite entries");
  if (L(grid.start()).rows() != I0.rows()) {
    throw DimensionMismatch("solve_invariant: generator and I0 dimensions differ");
  }
  const double h = grid.step();
  const std::size_t n = grid.steps();
  const std::size_t g = kSolverGuardSteps;

  auto forward = detail::integrate_commutator(L, I0, grid.start(), h, n + g, 1);
  auto backward = detail::integrate_commutator(L, I0, grid.start(), -h, g, 1);

  if (n > 0) {
    const auto fine = detail::integrate_commutator(L, I0, grid.start(), h, n, 2);
    const double diff = (fine.back() - forward[n]).norm();
    const double span = std::max(grid.end() - grid.start(), h);
    const double target = tolerance * std::max(1.0, I0.norm()) * span;
    if (diff > 10.0 * target) {
      throw StepTooLarge("solve_invariant: step halving moved the endpoint by " +
                         std::to_string(diff) + " (target " + std::to_string(target) + ")");
    }
  }

  auto table = std::make_shared<detail::HermiteTable>();
  table->t0 = grid.start() - h * static_cast<double>(g);
  table->h = h;
  table->values.reserve(n + 2 * g + 1);
  for (std::size_t k = g; k > 0; --k) table->values.push_back(backward[k]);
  for (auto& v : forward) table->values.push_back(std::move(v));

  const std::size_t m = table->values.size();
  const auto& v = table->values;
  table->slopes.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (k >= 2 && k + 2 < m) {
      table->slopes[k] = (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * h);
    } else if (k < 2) {
      table->slopes[k] =
          (-25.0 * v[k] + 48.0 * v[k + 1] - 36.0 * v[k + 2] + 16.0 * v[k + 3] - 3.0 * v[k + 4]) /
          (12.0 * h);
    } else {
      table->slopes[k] =
          (25.0 * v[k] - 48.0 * v[k - 1] + 36.0 * v[k - 2] - 16.0 * v[k - 3] + 3.0 * v[k - 4]) /
          (12.0 * h);
    }
  }

  InvariantTrajectory traj;
  traj.value = [table](double t) { return table->value(t); };
  traj.derivative = [table](double t) { return table->derivative(t); };
  traj.description = "numeric(dim=" + std::to_string(I0.rows()) + ")";
  traj.dim = I0.rows();
  traj.analytic = false;
  return traj;
}

// ---------------------------------------------------------------------------
// Verification

struct InvariantCheck {
  double max_residual = 0.0;     // max_t max_ij |dI/dt - [L, I]|
  double max_eigen_drift = 0.0;  // max_t max_b |lambda_b(t) - lambda_b(t0)|
};

inline InvariantCheck verify_invariant(const InvariantTrajectory& traj, const Generator& L,
                                       const TimeGrid& grid,
                                       double tol_deg = kDefaultDegeneracyTol) {
  InvariantCheck out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.time(static_cast<std::ptrdiff_t>(k));
    const SuperOperator I = traj.value(t);
    out.max_residual =
        std::max(out.max_residual, max_abs(traj.derivative(t) - invariant_rhs(L(t), I)));
  }
  SpectralBasis first = decompose(traj.value(grid.start()), tol_deg);
  SpectralBasis prev = first;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    SpectralBasis cur =
        align_continuity(prev, decompose(traj.value(grid.time(static_cast<std::ptrdiff_t>(k))), tol_deg),
                         tol_deg);
    for (std::size_t b = 0; b < cur.block_count(); ++b) {
      out.max_eigen_drift =
          std::max(out.max_eigen_drift, std::abs(cur.blocks[b].eigenvalue - first.blocks[b].eigenvalue));
    }
    prev = std::move(cur);
  }
  return out;
}

}  // namespace dynphase
