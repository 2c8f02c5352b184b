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

#ifndef SPLITSGD_DIAGNOSTIC_HPP
#define SPLITSGD_DIAGNOSTIC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "splitsgd/core.hpp"

namespace splitsgd {

/// Parameters of one splitting diagnostic: learning rate, window count w,
/// window length l and tolerance q.
struct DiagnosticConfig {
  real eta = 1e-3;
  std::size_t w = 20;
  std::size_t l = 50;
  real q = 0.4;

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta))
      throw ContractViolation("diagnostic: eta must be finite and >= 0");
    if (w == 0 || l == 0)
      throw ContractViolation("diagnostic: w and l must be positive");
    if (!(q >= 0.0 && q <= 1.0))
      throw ContractViolation("diagnostic: q must lie in [0, 1]");
  }

  std::size_t steps_per_thread() const noexcept { return w * l; }
};

struct DiagnosticResult {
  ParamVector theta_d;            // midpoint of the two thread endpoints
  bool stationary = false;        // T_D == S
  std::vector<real> coherences;   // Q_1..Q_w
  real negative_count = 0.0;      // sum_i (1 - sign Q_i) / 2
  /// Norms of the window-mean gradients, per thread: [thread][window].
  std::array<std::vector<real>, 2> window_norms;
};

struct Decision {
  bool stationary;
  real negative_count;
};

/// Stationarity decision on a set of coherences. sign(0) = 0, so an exact
/// zero counts one half.
inline Decision decide(std::span<const real> coherences, real q) {
  if (coherences.empty())
    throw ContractViolation("decide: empty coherence sequence");
  real count = 0.0;
  for (real c : coherences) {
    const real sign = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
    count += (1.0 - sign) / 2.0;
  }
  return {count >= q * static_cast<real>(coherences.size()), count};
}

namespace detail {

struct ThreadOutcome {
  ParamVector last;
  std::vector<ParamVector> window_means;
};

template <GradientOracle O>
ThreadOutcome run_diagnostic_thread(const O &oracle, const ParamVector &theta_in,
                                    const DiagnosticConfig &cfg,
                                    OptimizerKernel kernel, RngStream rng,
                                    int thread_id) {
  ThreadOutcome out{theta_in, {}};
  out.window_means.reserve(cfg.w);
  ParamVector &theta = out.last;
  std::size_t step = 0;
  for (std::size_t i = 0; i < cfg.w; ++i) {
#ifndef NDEBUG
    const ParamVector window_start = theta;
#endif
    ParamVector sum(theta.size());
    for (std::size_t j = 0; j < cfg.l; ++j, ++step) {
      try {
        GradientSample g = oracle.sample(theta, rng);
        axpy(1.0, g.gradient, sum);
        kernel.apply(theta, g.gradient, cfg.eta, step);
      } catch (const NumericError &) {
        throw DivergenceError(step, thread_id);
      }
    }
    for (auto &v : sum)
      v /= static_cast<real>(cfg.l);
#ifndef NDEBUG
    // For plain SGD the window mean is also (theta_{(i-1)l} - theta_{il}) / (l eta).
    if (kernel.kind() == KernelKind::plain && cfg.eta > 0.0) {
      const real scale = static_cast<real>(cfg.l) * cfg.eta;
      real mag = 1.0;
      for (std::size_t k = 0; k < theta.size(); ++k)
        mag = std::max({mag, std::abs(theta[k]) / scale, std::abs(sum[k])});
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const real from_iterates = (window_start[k] - theta[k]) / scale;
        if (std::abs(from_iterates - sum[k]) > 1e-9 * mag)
          throw std::logic_error("diagnostic: window mean disagrees with iterate difference");
      }
    }
#endif
    out.window_means.push_back(std::move(sum));
  }
  return out;
}

} // namespace detail

/**
 * Splitting diagnostic.
 *
 * Two SGD threads start at theta_in with independent streams forked from
 * `rng` (child ids 1 and 2) and run w*l steps each at constant eta. Each
 * window's mean gradient is accumulated from the samples themselves, then
 * Q_i = <gbar_i^(1), gbar_i^(2)> and the decision follows decide().
 * Uses exactly 2*w*l oracle calls.
 *
 * Each thread gets a fresh copy of `kernel` with zero velocity.
 * Throws DivergenceError (with thread id 1 or 2) if an iterate stops being
 * finite.
 */
template <GradientOracle O>
DiagnosticResult run_diagnostic(const O &oracle, const ParamVector &theta_in,
                                const DiagnosticConfig &cfg,
                                const OptimizerKernel &kernel,
                                const RngStream &rng) {
  cfg.validate();
  if (theta_in.size() != oracle.dimension())
    throw ContractViolation("diagnostic: start point has wrong dimension");
  if (!theta_in.all_finite())
    throw ContractViolation("diagnostic: start point must be finite");

  const auto first = detail::run_diagnostic_thread(oracle, theta_in, cfg, kernel.fresh(),
                                                   rng.fork(1), 1);
  const auto second = detail::run_diagnostic_thread(oracle, theta_in, cfg, kernel.fresh(),
                                                    rng.fork(2), 2);

  DiagnosticResult result;
  result.theta_d = midpoint(first.last, second.last);
  result.coherences.reserve(cfg.w);
  for (std::size_t i = 0; i < cfg.w; ++i) {
    result.coherences.push_back(dot(first.window_means[i], second.window_means[i]));
    result.window_norms[0].push_back(norm(first.window_means[i]));
    result.window_norms[1].push_back(norm(second.window_means[i]));
  }
  const Decision decision = decide(result.coherences, cfg.q);
  result.stationary = decision.stationary;
  result.negative_count = decision.negative_count;
  return result;
}

/// Cosine of the angle between a pair of window means; 0 if either is zero.
inline real normalized_coherence(real coherence, real norm1, real norm2) {
  if (norm1 == 0.0 || norm2 == 0.0)
    return 0.0;
  return std::clamp(coherence / (norm1 * norm2), -1.0, 1.0);
}

/// Per-window normalized coherences of a finished diagnostic.
inline std::vector<real> gradient_coherence_trace(const DiagnosticResult &result) {
  std::vector<real> out;
  out.reserve(result.coherences.size());
  for (std::size_t i = 0; i < result.coherences.size(); ++i)
    out.push_back(normalized_coherence(result.coherences[i], result.window_norms[0][i],
                                       result.window_norms[1][i]));
  return out;
}

template <GradientOracle O>
std::vector<real> gradient_coherence_trace(const O &oracle, const ParamVector &theta_in,
                                           const DiagnosticConfig &cfg,
                                           const OptimizerKernel &kernel,
                                           const RngStream &rng) {
  return gradient_coherence_trace(run_diagnostic(oracle, theta_in, cfg, kernel, rng));
}

} // namespace splitsgd

#endif // SPLITSGD_DIAGNOSTIC_HPP
