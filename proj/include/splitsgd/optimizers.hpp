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

#ifndef SPLITSGD_OPTIMIZERS_HPP
#define SPLITSGD_OPTIMIZERS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "splitsgd/core.hpp"
#include "splitsgd/diagnostic.hpp"

namespace splitsgd {

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

enum class TraceEvent { none, diagnostic_s, diagnostic_n, lr_halved, pflug_detect };

inline std::string_view to_string(TraceEvent e) {
  switch (e) {
  case TraceEvent::none: return "none";
  case TraceEvent::diagnostic_s: return "diagnostic-S";
  case TraceEvent::diagnostic_n: return "diagnostic-N";
  case TraceEvent::lr_halved: return "lr-halved";
  case TraceEvent::pflug_detect: return "pflug-detect";
  }
  return "none";
}

struct TraceRecord {
  std::size_t epoch = 0;
  std::size_t gradient_evals = 0;
  real learning_rate = 0.0;
  real full_loss = 0.0;
  TraceEvent event = TraceEvent::none;

  friend bool operator==(const TraceRecord &, const TraceRecord &) = default;
};

/// Records are taken at every epoch boundary and whenever an event happens
/// between boundaries. `epoch_units` counts charged gradient steps: a
/// diagnostic is charged w*l (its two threads run side by side) while
/// `gradient_evals` counts every oracle call.
struct RunTrace {
  std::vector<TraceRecord> records;
  std::size_t gradient_evals = 0;
  std::size_t epoch_units = 0;
  std::size_t diagnostics = 0;
  std::size_t thread_steps = 0;
  ParamVector final_theta;

  real final_loss() const {
    return records.empty() ? std::numeric_limits<real>::quiet_NaN() : records.back().full_loss;
  }
  real final_log_loss() const { return std::log(final_loss()); }

  friend bool operator==(const RunTrace &, const RunTrace &) = default;
};

/// Budget and logging knobs shared by all runners.
struct RunOptions {
  std::size_t budget_epochs = 100;
  /// Evaluate the full loss at each record. Detection races switch it off;
  /// the loss column then holds NaN.
  bool record_loss = true;
};

namespace detail {

/// Shared bookkeeping for the runners: charges work, emits records at epoch
/// boundaries, carries the iterate.
template <Objective P>
class RunState {
public:
  RunState(const P &problem, ParamVector theta0, const RunOptions &opts)
      : problem_(problem), opts_(opts), n_(problem.sample_count()),
        budget_units_(opts.budget_epochs * problem.sample_count()) {
    if (opts.budget_epochs == 0)
      throw ContractViolation("budget must be at least one epoch");
    if (theta0.size() != problem.dimension())
      throw ContractViolation("start point has wrong dimension");
    trace_.final_theta = std::move(theta0);
  }

  ParamVector &theta() { return trace_.final_theta; }
  std::size_t remaining() const { return budget_units_ - trace_.epoch_units; }
  bool exhausted() const { return trace_.epoch_units >= budget_units_; }
  std::size_t units() const { return trace_.epoch_units; }
  std::size_t n() const { return n_; }

  void start(real lr) { push(0, lr, TraceEvent::none); }

  /// One single-thread step.
  template <GradientOracle O>
  void step(const O &oracle, OptimizerKernel &kernel, real eta, RngStream &rng) {
    const std::size_t step_index = trace_.gradient_evals;
    try {
      GradientSample g = oracle.sample(theta(), rng);
      kernel.apply(theta(), g.gradient, eta, step_index);
    } catch (const NumericError &) {
      throw DivergenceError(step_index);
    }
    charge_single_step();
  }

  /// Emits the boundary record if the last unit of work completed an epoch.
  void tick(real lr) {
    if (trace_.epoch_units % n_ == 0)
      push(trace_.epoch_units / n_, lr, TraceEvent::none);
  }

  void charge_single_step() {
    trace_.gradient_evals += 1;
    trace_.thread_steps += 1;
    trace_.epoch_units += 1;
  }

  void charge_diagnostic(std::size_t evals, std::size_t units) {
    trace_.gradient_evals += evals;
    trace_.epoch_units += units;
    trace_.diagnostics += 1;
  }

  /// Records an event. If epoch boundaries were crossed since the last record
  /// they are emitted and the event rides on the first of them.
  void event(TraceEvent e, real lr) {
    const std::size_t last_epoch = trace_.records.empty() ? 0 : trace_.records.back().epoch;
    const std::size_t now_epoch = trace_.epoch_units / n_;
    if (now_epoch > last_epoch) {
      // a diagnostic covering several epochs still yields one record per
      // boundary; all of them carry the post-diagnostic iterate
      for (std::size_t ep = last_epoch + 1; ep <= now_epoch; ++ep)
        push(ep, lr, ep == last_epoch + 1 ? e : TraceEvent::none);
    } else {
      push(now_epoch, lr, e);
    }
  }

  RunTrace finish() { return std::move(trace_); }

private:
  void push(std::size_t epoch, real lr, TraceEvent e) {
    TraceRecord r;
    r.epoch = epoch;
    r.gradient_evals = trace_.gradient_evals;
    r.learning_rate = lr;
    r.full_loss = opts_.record_loss ? problem_.full_loss(trace_.final_theta)
                                    : std::numeric_limits<real>::quiet_NaN();
    r.event = e;
    trace_.records.push_back(r);
  }

  const P &problem_;
  RunOptions opts_;
  std::size_t n_;
  std::size_t budget_units_;
  RunTrace trace_;
};

} // namespace detail

// ---------------------------------------------------------------------------
// SplitSGD
// ---------------------------------------------------------------------------

inline constexpr std::size_t unlimited_diagnostics = std::numeric_limits<std::size_t>::max();

struct SplitSgdConfig {
  real eta = 1e-3;
  std::size_t w = 20;
  std::size_t l = 50;
  real q = 0.4;
  std::size_t diagnostics = unlimited_diagnostics; // B
  std::size_t t1 = 4000;                           // gradient steps
  real gamma = 0.5;
  OptimizerKernel kernel = OptimizerKernel::plain();

  void validate() const {
    DiagnosticConfig{eta, w, l, q}.validate();
    if (!(eta > 0.0))
      throw ContractViolation("splitsgd: eta must be positive");
    if (t1 < 1)
      throw ContractViolation("splitsgd: t1 must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0))
      throw ContractViolation("splitsgd: gamma must lie strictly inside (0, 1)");
  }

  DiagnosticConfig diagnostic(real current_eta) const { return {current_eta, w, l, q}; }
};

/// Learning rate and thread length of the current SplitSGD stage.
struct ScheduleState {
  real eta;
  std::size_t thread_length;
  std::size_t detections = 0;

  ScheduleState(real eta0, std::size_t t1) : eta(eta0), thread_length(t1) {}

  /// eta <- gamma eta, t <- floor(t / gamma)
  void on_detection(real gamma) {
    eta *= gamma;
    thread_length = static_cast<std::size_t>(
        std::floor(static_cast<real>(thread_length) / gamma));
    ++detections;
  }
};

struct SplitRun {
  RunTrace trace;
  ScheduleState schedule;
  /// Charged epochs at the end of the first diagnostic that returned S.
  std::optional<real> first_detection_epoch;
};

namespace detail {

template <Objective P>
SplitRun splitsgd_impl(const P &problem, const SplitSgdConfig &cfg, ParamVector theta0,
                       RngStream rng, const RunOptions &opts, bool stop_at_detection) {
  cfg.validate();
  RunState<P> run(problem, std::move(theta0), opts);
  ScheduleState schedule(cfg.eta, cfg.t1);
  OptimizerKernel kernel = cfg.kernel.fresh();
  const std::size_t diag_units = cfg.w * cfg.l;
  std::optional<real> detected;

  run.start(schedule.eta);
  std::size_t done = 0;
  while (!run.exhausted()) {
    const bool diagnose = done < cfg.diagnostics;
    const std::size_t len = diagnose ? std::min(schedule.thread_length, run.remaining())
                                     : run.remaining();
    for (std::size_t s = 0; s < len; ++s) {
      run.step(problem, kernel, schedule.eta, rng);
      run.tick(schedule.eta);
    }
    if (!diagnose || run.exhausted())
      break;
    if (run.remaining() < diag_units) {
      // not enough budget left for a diagnostic: finish on the current thread
      done = cfg.diagnostics;
      continue;
    }

    DiagnosticResult d = run_diagnostic(problem, run.theta(), cfg.diagnostic(schedule.eta),
                                        cfg.kernel, rng.fork(done + 1));
    ++done;
    run.theta() = std::move(d.theta_d);
    run.charge_diagnostic(2 * diag_units, diag_units);
    kernel = cfg.kernel.fresh();
    if (d.stationary) {
      schedule.on_detection(cfg.gamma);
      run.event(TraceEvent::diagnostic_s, schedule.eta);
      if (!detected)
        detected = static_cast<real>(run.units()) / static_cast<real>(run.n());
      if (stop_at_detection)
        break;
    } else {
      run.event(TraceEvent::diagnostic_n, schedule.eta);
    }
  }
  return {run.finish(), schedule, detected};
}

} // namespace detail

/**
 * SplitSGD: constant-rate threads of t_b steps alternating with splitting
 * diagnostics. The iterate continues from theta_D after every diagnostic; an
 * S outcome multiplies the rate by gamma and stretches the next thread to
 * floor(t_b / gamma).
 *
 * Stops once `opts.budget_epochs` epochs have been charged. After B
 * diagnostics (or when a diagnostic no longer fits in the budget) the last
 * thread simply runs on until the budget is used up, so B = 0 is constant
 * SGD.
 *
 * The main thread consumes `rng` directly; diagnostic b (1-based) draws from
 * rng.fork(b).
 */
template <Objective P>
SplitRun run_splitsgd(const P &problem, const SplitSgdConfig &cfg, ParamVector theta0,
                      RngStream rng, const RunOptions &opts = {}) {
  return detail::splitsgd_impl(problem, cfg, std::move(theta0), std::move(rng), opts, false);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

template <Objective P>
RunTrace run_constant_sgd(const P &problem, real eta, ParamVector theta0, RngStream rng,
                          const RunOptions &opts = {},
                          const OptimizerKernel &kernel_spec = OptimizerKernel::plain()) {
  if (!(eta >= 0.0))
    throw ContractViolation("constant sgd: eta must be >= 0");
  detail::RunState<P> run(problem, std::move(theta0), opts);
  OptimizerKernel kernel = kernel_spec.fresh();
  run.start(eta);
  while (!run.exhausted()) {
    run.step(problem, kernel, eta, rng);
    run.tick(eta);
  }
  return run.finish();
}

/// Step size of the 1/sqrt(t) baseline at gradient step t (1-based).
inline real sqrt_decay_rate(real eta, std::size_t t) {
  return 20.0 * eta / std::sqrt(static_cast<real>(t));
}

template <Objective P>
RunTrace run_sqrt_decay_sgd(const P &problem, real eta, ParamVector theta0, RngStream rng,
                            const RunOptions &opts = {}) {
  if (!(eta >= 0.0))
    throw ContractViolation("sqrt-decay sgd: eta must be >= 0");
  detail::RunState<P> run(problem, std::move(theta0), opts);
  OptimizerKernel kernel = OptimizerKernel::plain();
  std::size_t t = 1;
  run.start(sqrt_decay_rate(eta, t));
  while (!run.exhausted()) {
    run.step(problem, kernel, sqrt_decay_rate(eta, t), rng);
    ++t;
    run.tick(sqrt_decay_rate(eta, t));
  }
  return run.finish();
}

/// SGD^{1/2}: threads of t1, 2 t1, 4 t1, ... steps at eta, eta/2, eta/4, ...
template <Objective P>
RunTrace run_sgd_half(const P &problem, real eta, std::size_t t1, ParamVector theta0,
                      RngStream rng, const RunOptions &opts = {}) {
  if (!(eta >= 0.0))
    throw ContractViolation("sgd-half: eta must be >= 0");
  if (t1 < 1)
    throw ContractViolation("sgd-half: t1 must be >= 1");
  detail::RunState<P> run(problem, std::move(theta0), opts);
  OptimizerKernel kernel = OptimizerKernel::plain();
  ScheduleState schedule(eta, t1);
  run.start(schedule.eta);
  while (!run.exhausted()) {
    const std::size_t len = std::min(schedule.thread_length, run.remaining());
    for (std::size_t s = 0; s < len; ++s) {
      run.step(problem, kernel, schedule.eta, rng);
      if (s + 1 == schedule.thread_length) {
        schedule.on_detection(0.5);
        run.event(TraceEvent::lr_halved, schedule.eta);
      } else {
        run.tick(schedule.eta);
      }
    }
  }
  return run.finish();
}

// ---------------------------------------------------------------------------
// Detection races
// ---------------------------------------------------------------------------

struct DetectionOutcome {
  std::optional<real> epoch; // empty when the budget ran out first
  real max_epochs = 0.0;
  RunTrace trace;

  bool capped() const { return !epoch.has_value(); }
  real epoch_or_cap() const { return epoch.value_or(max_epochs); }
};

/**
 * Pflug-style detector: constant-rate SGD with a running sum
 * S += <g_t, g_{t-1}> over consecutive stochastic gradients (first update at
 * t = 2). Reports the first epoch boundary at which S < 0.
 */
template <Objective P>
DetectionOutcome run_pflug_detection(const P &problem, real eta, ParamVector theta0,
                                     RngStream rng, std::size_t max_epochs,
                                     bool record_loss = false) {
  if (!(eta >= 0.0))
    throw ContractViolation("pflug: eta must be >= 0");
  RunOptions opts{max_epochs, record_loss};
  detail::RunState<P> run(problem, std::move(theta0), opts);
  OptimizerKernel kernel = OptimizerKernel::plain();
  DetectionOutcome out;
  out.max_epochs = static_cast<real>(max_epochs);

  run.start(eta);
  real running = 0.0;
  std::optional<ParamVector> previous;
  std::size_t step = 0;
  while (!run.exhausted()) {
    GradientSample g;
    try {
      g = problem.sample(run.theta(), rng);
      kernel.apply(run.theta(), g.gradient, eta, step);
    } catch (const NumericError &) {
      throw DivergenceError(step);
    }
    ++step;
    if (previous)
      running += dot(g.gradient, *previous);
    previous = std::move(g.gradient);
    run.charge_single_step();
    if (run.units() % run.n() == 0) {
      if (running < 0.0) {
        out.epoch = static_cast<real>(run.units() / run.n());
        run.event(TraceEvent::pflug_detect, eta);
        break;
      }
      run.tick(eta);
    }
  }
  out.trace = run.finish();
  return out;
}

/// Runs SplitSGD until its first S outcome and reports the charged epochs at
/// that point (threads plus one epoch per w*l = n diagnostic).
template <Objective P>
DetectionOutcome run_split_detection(const P &problem, const SplitSgdConfig &cfg,
                                     ParamVector theta0, RngStream rng,
                                     std::size_t max_epochs, bool record_loss = false) {
  RunOptions opts{max_epochs, record_loss};
  SplitRun r = detail::splitsgd_impl(problem, cfg, std::move(theta0), std::move(rng), opts, true);
  DetectionOutcome out;
  out.max_epochs = static_cast<real>(max_epochs);
  out.epoch = r.first_detection_epoch;
  out.trace = std::move(r.trace);
  return out;
}

} // namespace splitsgd

#endif // SPLITSGD_OPTIMIZERS_HPP
