/*
 * Copyright (C) 2026 The splitsgd authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SPLITSGD_CORE_HPP
#define SPLITSGD_CORE_HPP

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "splitsgd/rng.hpp"

namespace splitsgd {

using real = double;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Violated precondition (dimension mismatch, out-of-range parameter).
class ContractViolation : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity showed up where a finite value was required.
class NumericError : public std::runtime_error {
public:
  NumericError(const std::string &what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

/// Non-finite iterate. `thread` is 0 for a single-thread run and 1 or 2 for
/// the two diagnostic threads.
class DivergenceError : public NumericError {
public:
  DivergenceError(std::size_t step, int thread = 0)
      : NumericError("iterate diverged" +
                         (thread ? " in thread " + std::to_string(thread)
                                 : std::string{}),
                     step),
        thread_(thread) {}

  int thread() const noexcept { return thread_; }

private:
  int thread_;
};

// ---------------------------------------------------------------------------
// ParamVector
// ---------------------------------------------------------------------------

/// Dense coordinate vector used for iterates, gradients and model truth.
class ParamVector {
public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, real fill = 0.0) : coords_(dim, fill) {}
  explicit ParamVector(std::vector<real> coords) : coords_(std::move(coords)) {}
  ParamVector(std::initializer_list<real> coords) : coords_(coords) {}

  std::size_t size() const noexcept { return coords_.size(); }
  real &operator[](std::size_t i) { return coords_[i]; }
  real operator[](std::size_t i) const { return coords_[i]; }

  std::span<real> coords() noexcept { return coords_; }
  std::span<const real> coords() const noexcept { return coords_; }

  auto begin() noexcept { return coords_.begin(); }
  auto end() noexcept { return coords_.end(); }
  auto begin() const noexcept { return coords_.begin(); }
  auto end() const noexcept { return coords_.end(); }

  bool all_finite() const noexcept {
    for (real v : coords_)
      if (!std::isfinite(v))
        return false;
    return true;
  }

  friend bool operator==(const ParamVector &, const ParamVector &) = default;

private:
  std::vector<real> coords_;
};

inline void require_same_dim(std::span<const real> a, std::span<const real> b,
                             const char *where) {
  if (a.size() != b.size())
    throw ContractViolation(std::string(where) + ": dimension mismatch (" +
                            std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
}

/// Euclidean inner product, summed left to right.
inline real dot(std::span<const real> a, std::span<const real> b) {
  require_same_dim(a, b, "dot");
  real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

inline real dot(const ParamVector &a, const ParamVector &b) {
  return dot(a.coords(), b.coords());
}

inline real norm(const ParamVector &a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void axpy(real alpha, const ParamVector &x, ParamVector &y) {
  require_same_dim(x.coords(), y.coords(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] += alpha * x[i];
}

inline ParamVector midpoint(const ParamVector &a, const ParamVector &b) {
  require_same_dim(a.coords(), b.coords(), "midpoint");
  ParamVector m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    m[i] = (a[i] + b[i]) / 2.0;
  return m;
}

// ---------------------------------------------------------------------------
// Gradient oracle abstraction
// ---------------------------------------------------------------------------

/// One noisy gradient g(theta, Z) with the loss at the same datum, if known.
struct GradientSample {
  ParamVector gradient;
  std::optional<real> loss;
};

/// Anything that can hand out unbiased gradient samples at a point.
template <typename O>
concept GradientOracle = requires(const O &oracle, const ParamVector &theta,
                                  RngStream &rng) {
  { oracle.dimension() } -> std::convertible_to<std::size_t>;
  { oracle.sample(theta, rng) } -> std::convertible_to<GradientSample>;
};

/// A gradient oracle that can also evaluate the full objective. `sample_count`
/// is the number of gradient draws that make up one epoch.
template <typename P>
concept Objective = GradientOracle<P> && requires(const P &p,
                                                  const ParamVector &theta) {
  { p.full_loss(theta) } -> std::convertible_to<real>;
  { p.sample_count() } -> std::convertible_to<std::size_t>;
};

// ---------------------------------------------------------------------------
// Update kernel
// ---------------------------------------------------------------------------

enum class KernelKind { plain, momentum };

/// Plain SGD or heavy-ball momentum. The velocity lives here and belongs to a
/// single optimizer thread.
class OptimizerKernel {
public:
  static OptimizerKernel plain() { return OptimizerKernel(KernelKind::plain, 0.0); }
  static OptimizerKernel momentum(real mu) {
    return OptimizerKernel(KernelKind::momentum, mu);
  }

  KernelKind kind() const noexcept { return kind_; }
  real momentum_coefficient() const noexcept { return mu_; }
  const ParamVector &velocity() const noexcept { return velocity_; }

  void reset() { velocity_ = ParamVector{}; }

  /// A copy of this kernel's configuration with zero velocity.
  OptimizerKernel fresh() const { return OptimizerKernel(kind_, mu_); }

  /// Applies one update in place. For the plain kernel this is exactly
  /// theta - eta * g; for momentum v <- mu * v + g, theta <- theta - eta * v.
  void apply(ParamVector &theta, const ParamVector &grad, real eta,
             std::size_t step = 0) {
    require_same_dim(theta.coords(), grad.coords(), "sgd_step");
    if (!(eta >= 0.0))
      throw ContractViolation("sgd_step: learning rate must be >= 0");
    if (!grad.all_finite())
      throw NumericError("non-finite gradient", step);

    if (kind_ == KernelKind::plain) {
      for (std::size_t i = 0; i < theta.size(); ++i)
        theta[i] -= eta * grad[i];
    } else {
      if (velocity_.size() != theta.size())
        velocity_ = ParamVector(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) {
        velocity_[i] = mu_ * velocity_[i] + grad[i];
        theta[i] -= eta * velocity_[i];
      }
    }
    if (!theta.all_finite())
      throw DivergenceError(step);
  }

private:
  OptimizerKernel(KernelKind kind, real mu) : kind_(kind), mu_(mu) {
    if (!(mu >= 0.0 && mu < 1.0))
      throw ContractViolation("momentum coefficient must lie in [0, 1)");
  }

  KernelKind kind_;
  real mu_;
  ParamVector velocity_;
};

/// Functional form of a single update.
inline ParamVector sgd_step(ParamVector theta, const GradientSample &g, real eta,
                            OptimizerKernel &kernel, std::size_t step = 0) {
  kernel.apply(theta, g.gradient, eta, step);
  return theta;
}

} // namespace splitsgd

#endif // SPLITSGD_CORE_HPP
