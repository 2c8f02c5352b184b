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

#ifndef SPLITSGD_ANALYSIS_HPP
#define SPLITSGD_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "splitsgd/core.hpp"
#include "splitsgd/diagnostic.hpp"
#include "splitsgd/objectives.hpp"
#include "splitsgd/optimizers.hpp"
#include "splitsgd/parallel.hpp"

namespace splitsgd {

inline constexpr real infinity = std::numeric_limits<real>::infinity();

/// Final natural-log loss of a run, or +inf if the run diverged.
template <typename Fn>
real final_log_loss_or_inf(Fn &&run) {
  try {
    const RunTrace trace = run();
    const real v = trace.final_log_loss();
    return std::isfinite(v) ? v : infinity;
  } catch (const NumericError &) {
    return infinity;
  }
}

// ---------------------------------------------------------------------------
// Type-I error of the decision rule under the fair-coin model
// ---------------------------------------------------------------------------

struct QRiskQuery {
  std::size_t w = 20;
  real q = 0.4;

  void validate() const {
    if (w == 0)
      throw ContractViolation("qrisk: w must be positive");
    if (!(q >= 0.0 && q <= 1.0))
      throw ContractViolation("qrisk: q must lie in [0, 1]");
  }
};

/// Smallest integer negative count that reaches q*w under decide().
inline std::size_t detection_threshold(std::size_t w, real q) {
  return static_cast<std::size_t>(std::ceil(q * static_cast<real>(w)));
}

/**
 * P(Binomial(w, 1/2) < ceil(q w)) = 2^-w sum_{i < ceil(q w)} C(w, i), the
 * chance that a stationary phase with coin-flip coherence signs is reported
 * as non-stationary. Binomials are summed exactly.
 */
inline real type1_error_probability(const QRiskQuery &query) {
  query.validate();
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  const std::size_t upper = detection_threshold(query.w, query.q);
  cpp_int sum = 0;
  cpp_int binom = 1; // C(w, 0)
  for (std::size_t i = 0; i < upper; ++i) {
    sum += binom;
    binom = binom * (query.w - i) / (i + 1);
  }
  const cpp_int total = cpp_int(1) << query.w;
  return cpp_rational(sum, total).convert_to<real>();
}

// ---------------------------------------------------------------------------
// Coherence histograms
// ---------------------------------------------------------------------------

struct CoherenceStudy {
  ProblemSpec problem;
  StartKind start = StartKind::near_opt;
  real eta = 1e-4;
  std::size_t burn_in_steps = 0;
  std::size_t w = 20;
  std::size_t l = 50;
  std::size_t window_index = 2; // 1-based
  std::size_t replications = 500;
  bool normalized = true;

  void validate() const {
    DiagnosticConfig{eta, w, l, 0.0}.validate();
    if (window_index < 1 || window_index > w)
      throw ContractViolation("coherence study: window index must lie in [1, w]");
    if (replications == 0)
      throw ContractViolation("coherence study: need at least one replication");
  }
};

struct HistogramRow {
  std::size_t replication = 0;
  real q_value = 0.0;
  real normalized = 0.0;
};

struct HistogramSummary {
  std::size_t count = 0;
  std::size_t diverged = 0;
  real mean = 0.0;
  real sd = 0.0;
  real negative_fraction = 0.0;
};

struct CoherenceHistogram {
  std::vector<HistogramRow> rows; // diverged replications excluded
  HistogramSummary summary;       // over q_value or normalized, per the study
};

/**
 * One recorded coherence per replication: perturbed start, burn_in_steps of
 * constant-rate SGD, then a diagnostic from which Q_{window_index} is kept.
 * Replication r draws everything from rng.fork(r); the output does not depend
 * on the worker count.
 */
template <Objective O>
CoherenceHistogram coherence_histogram(const O &oracle, const CoherenceStudy &study,
                                       const RngStream &rng, std::size_t threads = 1) {
  study.validate();
  struct Slot {
    bool diverged = false;
    HistogramRow row;
  };
  std::vector<Slot> slots(study.replications);
  const DiagnosticConfig cfg{study.eta, study.w, study.l, 0.0};

  parallel_for(study.replications, threads, [&](std::size_t r) {
    const RngStream base = rng.fork(r);
    ParamVector theta = perturbed_start(study.problem, study.start, base.fork(stream_ids::init));
    RngStream burn = base.fork(stream_ids::optimizer);
    OptimizerKernel kernel = OptimizerKernel::plain();
    try {
      for (std::size_t t = 0; t < study.burn_in_steps; ++t)
        kernel.apply(theta, oracle.sample(theta, burn).gradient, study.eta, t);
      const DiagnosticResult d = run_diagnostic(oracle, theta, cfg, kernel, base.fork(4));
      const std::size_t i = study.window_index - 1;
      slots[r].row = {r, d.coherences[i],
                      normalized_coherence(d.coherences[i], d.window_norms[0][i],
                                           d.window_norms[1][i])};
    } catch (const NumericError &) {
      slots[r].diverged = true;
    }
  });

  CoherenceHistogram out;
  for (const auto &s : slots) {
    if (s.diverged)
      ++out.summary.diverged;
    else
      out.rows.push_back(s.row);
  }
  auto &sum = out.summary;
  sum.count = out.rows.size();
  if (sum.count > 0) {
    std::vector<real> values;
    values.reserve(sum.count);
    for (const auto &row : out.rows)
      values.push_back(study.normalized ? row.normalized : row.q_value);
    sum.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<real>(sum.count);
    real ss = 0.0;
    std::size_t negatives = 0;
    for (real v : values) {
      ss += (v - sum.mean) * (v - sum.mean);
      negatives += v < 0.0;
    }
    sum.sd = sum.count > 1 ? std::sqrt(ss / static_cast<real>(sum.count - 1)) : 0.0;
    sum.negative_fraction = static_cast<real>(negatives) / static_cast<real>(sum.count);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Method comparison (final log-loss after a fixed budget)
// ---------------------------------------------------------------------------

enum class Method { splitsgd, constant, sqrt_decay, half };

inline std::string_view to_string(Method m) {
  switch (m) {
  case Method::splitsgd: return "splitsgd";
  case Method::constant: return "const";
  case Method::sqrt_decay: return "sqrt";
  case Method::half: return "half";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::splitsgd, Method::constant, Method::sqrt_decay, Method::half})
    if (to_string(m) == s)
      return m;
  throw ContractViolation("unknown method '" + std::string(s) + "'");
}

/// Defaults follow the convex setup: t1 = 4 epochs, w = 20, l = 50, q = 0.4,
/// gamma = 0.5.
struct SplitDefaults {
  std::size_t t1_epochs = 4;
  std::size_t w = 20;
  std::size_t l = 50;
  real q = 0.4;
  real gamma = 0.5;
  std::size_t diagnostics = unlimited_diagnostics;

  SplitSgdConfig config(real eta, std::size_t n) const {
    SplitSgdConfig cfg;
    cfg.eta = eta;
    cfg.w = w;
    cfg.l = l;
    cfg.q = q;
    cfg.gamma = gamma;
    cfg.t1 = t1_epochs * n;
    cfg.diagnostics = diagnostics;
    return cfg;
  }
};

struct CompareConfig {
  ProblemSpec problem;
  StartKind start = StartKind::reversed;
  std::vector<real> etas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<Method> methods{Method::splitsgd, Method::constant, Method::sqrt_decay,
                              Method::half};
  std::size_t seeds = 20;
  std::size_t budget_epochs = 100;
  SplitDefaults split;
};

struct CompareRow {
  Method method;
  real eta;
  std::size_t seed;
  real final_log_loss;
};

/// Runs one method from a given start. Diverged runs report +inf.
inline real run_method(const Problem &problem, Method method, real eta, const SplitDefaults &split,
                       const ParamVector &theta0, const RngStream &rng,
                       std::size_t budget_epochs) {
  const RunOptions opts{budget_epochs, true};
  return final_log_loss_or_inf([&]() -> RunTrace {
    switch (method) {
    case Method::splitsgd:
      return run_splitsgd(problem, split.config(eta, problem.sample_count()), theta0, rng, opts)
          .trace;
    case Method::constant:
      return run_constant_sgd(problem, eta, theta0, rng, opts);
    case Method::sqrt_decay:
      return run_sqrt_decay_sgd(problem, eta, theta0, rng, opts);
    case Method::half:
      return run_sgd_half(problem, eta, split.t1_epochs * problem.sample_count(), theta0, rng,
                          opts);
    }
    return {};
  });
}

/**
 * One row per (method, eta, seed) in that nesting order. For a given seed
 * every method starts from the same point and draws from the same optimizer
 * stream.
 */
inline std::vector<CompareRow> compare_methods(const CompareConfig &cfg, const RngStream &root,
                                               std::size_t threads = 1) {
  if (cfg.seeds == 0 || cfg.etas.empty() || cfg.methods.empty())
    throw ContractViolation("compare: need at least one method, learning rate and seed");
  const Problem problem = Problem::from_spec(cfg.problem);
  std::vector<CompareRow> rows;
  for (Method m : cfg.methods)
    for (real eta : cfg.etas)
      for (std::size_t s = 0; s < cfg.seeds; ++s)
        rows.push_back({m, eta, s, 0.0});
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    CompareRow &row = rows[i];
    const ParamVector theta0 =
        perturbed_start(cfg.problem, cfg.start, root.fork(stream_ids::init).fork(row.seed));
    const RngStream rng = root.fork(stream_ids::optimizer).fork(row.seed);
    row.final_log_loss =
        run_method(problem, row.method, row.eta, cfg.split, theta0, rng, cfg.budget_epochs);
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Detection race: splitting diagnostic against the pflug running sum
// ---------------------------------------------------------------------------

struct RaceConfig {
  ProblemSpec problem;
  StartKind start = StartKind::reversed;
  real eta = 1e-2;
  std::size_t reps = 100;
  std::size_t max_epochs = 1000;
  SplitDefaults split;
};

struct RaceRow {
  std::size_t rep;
  std::string_view method; // "split" or "pflug"
  real detection_epoch;    // the cap when capped, +inf when diverged
  bool capped;
  bool diverged;
};

inline std::vector<RaceRow> detection_race(const RaceConfig &cfg, const RngStream &root,
                                           std::size_t threads = 1) {
  const Problem problem = Problem::from_spec(cfg.problem);
  std::vector<RaceRow> rows(2 * cfg.reps);
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const std::size_t rep = i / 2;
    const bool split = i % 2 == 0;
    const ParamVector theta0 =
        perturbed_start(cfg.problem, cfg.start, root.fork(stream_ids::init).fork(rep));
    const RngStream rng = root.fork(stream_ids::optimizer).fork(rep);
    RaceRow row{rep, split ? "split" : "pflug", 0.0, false, false};
    try {
      const DetectionOutcome out =
          split ? run_split_detection(problem, cfg.split.config(cfg.eta, problem.sample_count()),
                                      theta0, rng, cfg.max_epochs)
                : run_pflug_detection(problem, cfg.eta, theta0, rng, cfg.max_epochs);
      row.detection_epoch = out.epoch_or_cap();
      row.capped = out.capped();
    } catch (const NumericError &) {
      row.detection_epoch = infinity;
      row.capped = true;
      row.diverged = true;
    }
    rows[i] = row;
  });
  return rows;
}

// ---------------------------------------------------------------------------
// (w, q) sensitivity grid
// ---------------------------------------------------------------------------

struct SensitivityConfig {
  ProblemSpec problem;
  StartKind start = StartKind::reversed;
  SplitDefaults base;
  std::vector<std::size_t> w_values{10, 20, 40};
  std::vector<real> q_values{0.35, 0.40, 0.45};
  std::vector<real> etas{1e-3};
  std::size_t seeds = 5;
  std::size_t budget_epochs = 100;
};

struct SensitivityRow {
  std::size_t w, l;
  real q, eta;
  std::size_t seed;
  real final_log_loss;
};

struct SensitivityCell {
  std::size_t w, l;
  real q, eta;
  real mean_final_log_loss; // +inf if any seed diverged
};

struct SensitivityGrid {
  std::vector<SensitivityRow> rows;
  std::vector<SensitivityCell> cells;
};

/// Window length that keeps a diagnostic at one epoch: l = floor(n / w).
inline std::size_t window_length_for(std::size_t n, std::size_t w) {
  if (w == 0 || w > n)
    throw ContractViolation("sensitivity: need 1 <= w <= n");
  return n / w;
}

inline SensitivityGrid sensitivity_grid(const SensitivityConfig &cfg, const RngStream &root,
                                        std::size_t threads = 1) {
  if (cfg.seeds == 0)
    throw ContractViolation("sensitivity: need at least one seed");
  const Problem problem = Problem::from_spec(cfg.problem);
  const std::size_t n = problem.sample_count();
  SensitivityGrid grid;
  for (std::size_t w : cfg.w_values)
    for (real q : cfg.q_values)
      for (real eta : cfg.etas) {
        const std::size_t l = window_length_for(n, w);
        grid.cells.push_back({w, l, q, eta, 0.0});
        for (std::size_t s = 0; s < cfg.seeds; ++s)
          grid.rows.push_back({w, l, q, eta, s, 0.0});
      }

  parallel_for(grid.rows.size(), threads, [&](std::size_t i) {
    SensitivityRow &row = grid.rows[i];
    const std::size_t cell = i / cfg.seeds;
    SplitDefaults split = cfg.base;
    split.w = row.w;
    split.l = row.l;
    split.q = row.q;
    const ParamVector theta0 =
        perturbed_start(cfg.problem, cfg.start, root.fork(stream_ids::init).fork(row.seed));
    const RngStream rng = root.fork(stream_ids::optimizer).fork(cell).fork(row.seed);
    row.final_log_loss =
        run_method(problem, Method::splitsgd, row.eta, split, theta0, rng, cfg.budget_epochs);
  });

  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    real total = 0.0;
    for (std::size_t s = 0; s < cfg.seeds; ++s)
      total += grid.rows[c * cfg.seeds + s].final_log_loss;
    grid.cells[c].mean_final_log_loss = total / static_cast<real>(cfg.seeds);
  }
  return grid;
}

} // namespace splitsgd

#endif // SPLITSGD_ANALYSIS_HPP
