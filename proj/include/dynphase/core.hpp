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

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dynphase {

using Complex = std::complex<double>;
using Index = Eigen::Index;

/// Square complex matrix acting on Hilbert-Schmidt vectors (L, I, [L, I], ...).
using SuperOperator = Eigen::MatrixXcd;

/// Density operator in the (I, sx, sy, sz) basis, stored as (c0, c1, c2, c3)
/// with rho = (c0 I + c1 sx + c2 sy + c3 sz) / 2. Physical states have c0 = 1.
using HSVector = Eigen::VectorXcd;

/// Time-dependent generator t -> L(t).
using Generator = std::function<SuperOperator(double)>;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors
//
// InvalidInput covers precondition violations a caller can fix by changing
// parameters; NumericalFailure covers conditions detected while computing.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

#define DYNPHASE_DEFINE_ERROR(Name, Base)                                 \
  class Name : public Base {                                              \
   public:                                                                \
    explicit Name(const std::string& what) : Base(#Name ": " + what) {}   \
  }

DYNPHASE_DEFINE_ERROR(DimensionMismatch, InvalidInput);
DYNPHASE_DEFINE_ERROR(DegenerateFamily, InvalidInput);
DYNPHASE_DEFINE_ERROR(SingularXi, InvalidInput);
DYNPHASE_DEFINE_ERROR(VanishingK1, InvalidInput);
DYNPHASE_DEFINE_ERROR(DegenerateBlock, InvalidInput);
DYNPHASE_DEFINE_ERROR(NotBlockDecoupled, NumericalFailure);
DYNPHASE_DEFINE_ERROR(NonDiagonalizable, NumericalFailure);
DYNPHASE_DEFINE_ERROR(AmbiguousMatching, NumericalFailure);
DYNPHASE_DEFINE_ERROR(StepTooLarge, NumericalFailure);
DYNPHASE_DEFINE_ERROR(NotCyclic, NumericalFailure);
DYNPHASE_DEFINE_ERROR(VanishingOverlap, NumericalFailure);

#undef DYNPHASE_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Uniform time grid t_k = start + k * step, k = 0..steps.

class TimeGrid {
 public:
  TimeGrid() = default;

  /// Grid on [start, end] whose step is the largest value <= `step` that
  /// divides the interval evenly.
  static TimeGrid over(double start, double end, double step) {
    if (!(step > 0.0) || !std::isfinite(step)) {
      throw InvalidInput("TimeGrid: step must be positive and finite");
    }
    if (!(end >= start) || !std::isfinite(start) || !std::isfinite(end)) {
      throw InvalidInput("TimeGrid: need finite start <= end");
    }
    const double span = end - start;
    auto n = static_cast<std::size_t>(std::ceil(span / step - 1e-9));
    TimeGrid g;
    g.start_ = start;
    g.steps_ = n;
    g.step_ = n == 0 ? step : span / static_cast<double>(n);
    return g;
  }

  static TimeGrid with_steps(double start, double end, std::size_t steps) {
    if (steps == 0) throw InvalidInput("TimeGrid: need at least one step");
    return over(start, end, (end - start) / static_cast<double>(steps));
  }

  double start() const { return start_; }
  double end() const { return start_ + step_ * static_cast<double>(steps_); }
  double step() const { return step_; }
  std::size_t steps() const { return steps_; }
  std::size_t size() const { return steps_ + 1; }

  /// k may run past either end (guard points for finite differences).
  double time(std::ptrdiff_t k) const { return start_ + step_ * static_cast<double>(k); }

  /// Grid with the same start and twice the step over the largest even prefix.
  TimeGrid coarsened() const {
    TimeGrid g;
    g.start_ = start_;
    g.step_ = 2.0 * step_;
    g.steps_ = steps_ / 2;
    return g;
  }

  TimeGrid refined() const {
    TimeGrid g;
    g.start_ = start_;
    g.step_ = 0.5 * step_;
    g.steps_ = 2 * steps_;
    return g;
  }

 private:
  double start_ = 0.0;
  double step_ = 1.0;
  std::size_t steps_ = 0;
};

inline Generator constant_generator(SuperOperator L) {
  return [L = std::move(L)](double) { return L; };
}

inline SuperOperator commutator(const SuperOperator& a, const SuperOperator& b) {
  return a * b - b * a;
}

/// Largest entry magnitude.
inline double max_abs(const Eigen::MatrixXcd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace dynphase
