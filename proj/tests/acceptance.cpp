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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any of them fails. Every random quantity derives from the
// fixed root seed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "splitsgd/analysis.hpp"

using namespace splitsgd;

namespace {

constexpr std::uint64_t root_seed = 1;

struct Verdict {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  const char *name;
  double time_limit_s;
  std::function<Verdict()> check;
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const ProblemSpec &spec(Family f) {
  static const ProblemSpec lin = make_default_spec(Family::linear, root_seed);
  static const ProblemSpec logi = make_default_spec(Family::logistic, root_seed);
  return f == Family::linear ? lin : logi;
}

const Problem &problem(Family f) {
  static const Problem lin = Problem::from_spec(spec(Family::linear));
  static const Problem logi = Problem::from_spec(spec(Family::logistic));
  return f == Family::linear ? lin : logi;
}

real rel_err(const ParamVector &a, const ParamVector &b) {
  real num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::sqrt(den);
}

// 1 -----------------------------------------------------------------------
Verdict gradient_correctness() {
  real worst = 0.0;
  RngStream rng = RngStream(root_seed).fork(101);
  for (Family f : {Family::linear, Family::logistic}) {
    const Problem &p = problem(f);
    for (int t = 0; t < 100; ++t) {
      ParamVector theta(p.dimension());
      for (auto &v : theta)
        v = rng.normal(0.0, 2.0);
      const ParamVector g = p.full_gradient(theta);
      ParamVector fd(p.dimension());
      const real h = 1e-6;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        ParamVector up = theta, down = theta;
        up[j] += h;
        down[j] -= h;
        fd[j] = (p.full_loss(up) - p.full_loss(down)) / (2.0 * h);
      }
      worst = std::max(worst, rel_err(fd, g));
    }
  }
  return {worst <= 1e-6, "max relative error " + fmt("%.3g", worst) + " (limit 1e-6)"};
}

// 2 -----------------------------------------------------------------------
Verdict oracle_unbiasedness() {
  real worst = 0.0;
  RngStream rng = RngStream(root_seed).fork(102);
  for (Family f : {Family::linear, Family::logistic}) {
    const Problem &p = problem(f);
    for (int t = 0; t < 10; ++t) {
      ParamVector theta(p.dimension());
      for (auto &v : theta)
        v = rng.normal(0.0, 2.0);
      // every index the sampler can return, each with probability 1/n
      std::vector<long double> acc(p.dimension(), 0.0L);
      for (std::size_t i = 0; i < p.sample_count(); ++i) {
        const ParamVector g = p.datum_gradient(i, theta);
        for (std::size_t j = 0; j < g.size(); ++j)
          acc[j] += g[j];
      }
      ParamVector mean(p.dimension());
      for (std::size_t j = 0; j < mean.size(); ++j)
        mean[j] = static_cast<real>(acc[j] / p.sample_count());
      worst = std::max(worst, rel_err(mean, p.full_gradient(theta)));
    }
  }
  return {worst <= 1e-12, "max relative error " + fmt("%.3g", worst) + " (limit 1e-12)"};
}

// 3 -----------------------------------------------------------------------
Verdict decision_brute_force() {
  std::size_t checked = 0, mismatches = 0;
  for (int w = 1; w <= 6; ++w) {
    int patterns = 1;
    for (int i = 0; i < w; ++i)
      patterns *= 3;
    for (int code = 0; code < patterns; ++code) {
      std::vector<real> qs;
      int neg = 0, zero = 0;
      for (int i = 0, c = code; i < w; ++i, c /= 3) {
        const int s = c % 3 - 1;
        qs.push_back(1.5 * s);
        neg += s < 0;
        zero += s == 0;
      }
      for (real q : {0.0, 0.25, 0.4, 0.5, 1.0}) {
        // count = neg + zero / 2 >= q w, in integers
        const bool literal = 2 * neg + zero >= 2.0 * (q * w);
        mismatches += decide(qs, q).stationary != literal;
        ++checked;
      }
    }
  }
  return {mismatches == 0,
          std::to_string(checked) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

// 4, 5 --------------------------------------------------------------------
real histogram_negative_fraction(real eta, std::size_t burn_in_epochs) {
  CoherenceStudy s;
  s.problem = spec(Family::linear);
  s.start = StartKind::reversed;
  s.eta = eta;
  s.burn_in_steps = burn_in_epochs * s.problem.n;
  s.w = 20;
  s.l = 50;
  s.window_index = 2;
  s.replications = 500;
  s.normalized = true;
  const auto h = coherence_histogram(problem(Family::linear), s,
                                     RngStream(root_seed).fork(stream_ids::replications));
  return h.summary.diverged ? std::nan("") : h.summary.negative_fraction;
}

real small_eta_fraction = std::nan("");

Verdict theorem1_regime() {
  small_eta_fraction = histogram_negative_fraction(1e-4, 0);
  return {small_eta_fraction < 0.05, "negative fraction of Q2 " + fmt("%.4f", small_eta_fraction) + " (< 0.05)"};
}

Verdict theorem2_regime() {
  const real frac = histogram_negative_fraction(1e-2, 200);
  const real sep = frac - small_eta_fraction;
  const bool in_band = frac >= 0.40 && frac <= 0.60;
  return {in_band && sep >= 0.25, "negative fraction of Q2 " + fmt("%.4f", frac) + " (in [0.40, 0.60]), separation " +
                                      fmt("%.4f", sep) + " (>= 0.25)"};
}

// 6 -----------------------------------------------------------------------
real direct_binomial_sum(std::size_t w, real q) {
  // C(w, i) fits in 64 bits for w <= 60
  const auto upper = static_cast<std::size_t>(std::ceil(q * w));
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < upper; ++i) {
    std::uint64_t c = 1;
    for (std::size_t k = 1; k <= i; ++k)
      c = c * (w - i + k) / k;
    sum += c;
  }
  return std::ldexp(static_cast<real>(sum), -static_cast<int>(w));
}

Verdict type1_calculator() {
  const real a = type1_error_probability({2, 0.5});
  const real b = type1_error_probability({20, 0.4});
  bool zero = true;
  for (std::size_t w : {1u, 2u, 5u, 20u, 75u, 500u})
    zero = zero && type1_error_probability({w, 0.0}) == 0.0;
  const bool ok = a == 0.25 && b == direct_binomial_sum(20, 0.4) && std::abs(b - 0.131588) < 5e-7 && zero;
  return {ok, "w=2,q=0.5 -> " + fmt("%.6g", a) + "; w=20,q=0.4 -> " + fmt("%.6f", b) +
                  " (direct sum " + fmt("%.6f", direct_binomial_sum(20, 0.4)) + "); q=0 -> " +
                  (zero ? "0" : "nonzero")};
}

// 7 -----------------------------------------------------------------------
Verdict schedule_identities() {
  const Problem &p = problem(Family::linear);
  const ParamVector start = reversed_start(spec(Family::linear));
  bool ok = true;
  std::string detail;
  for (real gamma : {0.5, 0.3}) {
    SplitSgdConfig cfg;
    cfg.eta = 1e-3;
    cfg.q = 0.0;
    cfg.gamma = gamma;
    cfg.t1 = 1000;
    const auto run = run_splitsgd(p, cfg, start, RngStream(root_seed).fork(107), RunOptions{20, false});
    real eta = cfg.eta;
    std::size_t len = cfg.t1, prev_evals = 0, b = 0;
    for (const auto &r : run.trace.records) {
      if (r.event != TraceEvent::diagnostic_s)
        continue;
      ++b;
      const std::size_t thread = r.gradient_evals - prev_evals - 2 * cfg.w * cfg.l;
      prev_evals = r.gradient_evals;
      ok = ok && thread == len;
      eta *= gamma;
      len = static_cast<std::size_t>(std::floor(static_cast<real>(len) / gamma));
      ok = ok && r.learning_rate == eta;
    }
    ok = ok && b >= 3 && run.schedule.eta == eta && run.schedule.thread_length == len;
    detail += "gamma=" + fmt("%g", gamma) + ": " + std::to_string(b) + " diagnostics, final thread " +
              std::to_string(len) + "; ";
  }
  SplitSgdConfig zero_b;
  zero_b.eta = 1e-2;
  zero_b.diagnostics = 0;
  const RngStream rng = RngStream(root_seed).fork(207);
  const auto split = run_splitsgd(p, zero_b, start, rng, RunOptions{10, true});
  const auto constant = run_constant_sgd(p, 1e-2, start, rng, RunOptions{10, true});
  const bool same = split.trace == constant;
  detail += same ? "B=0 trace identical to constant SGD" : "B=0 trace differs from constant SGD";
  return {ok && same, detail};
}

// 8 -----------------------------------------------------------------------
Verdict robustness() {
  CompareConfig cfg;
  cfg.problem = spec(Family::linear);
  cfg.seeds = 20;
  cfg.budget_epochs = 100;
  const auto rows = compare_methods(cfg, RngStream(root_seed), resolve_threads(0));

  std::map<std::pair<Method, real>, real> mean;
  for (const auto &r : rows)
    mean[{r.method, r.eta}] += r.final_log_loss / static_cast<real>(cfg.seeds);

  std::string detail;
  real largest = std::nan("");
  for (real eta : cfg.etas) {
    bool finite = true;
    for (Method m : cfg.methods)
      finite = finite && std::isfinite(mean[{m, eta}]);
    if (finite)
      largest = eta;
  }
  if (std::isnan(largest))
    return {false, "no learning rate where every method stays finite"};
  const real smallest = cfg.etas.front();
  const bool a = mean[{Method::splitsgd, largest}] <= mean[{Method::constant, largest}];
  const bool b = mean[{Method::splitsgd, smallest}] <= mean[{Method::half, smallest}];

  std::map<Method, real> worst;
  for (real eta : cfg.etas) {
    real best = infinity;
    for (Method m : cfg.methods)
      best = std::min(best, mean[{m, eta}]);
    if (!std::isfinite(best))
      continue;
    for (Method m : cfg.methods)
      worst[m] = std::max(worst[m], mean[{m, eta}] - best);
  }
  bool c = true;
  for (Method m : cfg.methods)
    c = c && worst[Method::splitsgd] <= worst[m];

  detail += "(a) eta=" + fmt("%g", largest) + " split " + fmt("%.4f", mean[{Method::splitsgd, largest}]) +
            " vs const " + fmt("%.4f", mean[{Method::constant, largest}]) + (a ? " ok" : " FAIL");
  detail += "; (b) eta=" + fmt("%g", smallest) + " split " + fmt("%.4f", mean[{Method::splitsgd, smallest}]) +
            " vs half " + fmt("%.4f", mean[{Method::half, smallest}]) + (b ? " ok" : " FAIL");
  detail += "; (c) worst regret";
  for (Method m : cfg.methods)
    detail += std::string(" ") + std::string(to_string(m)) + "=" + fmt("%.4f", worst[m]);
  detail += c ? " ok" : " FAIL";
  return {a && b && c, detail};
}

// 9 -----------------------------------------------------------------------
real median(std::vector<real> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Verdict diagnostic_race() {
  RaceConfig cfg;
  cfg.problem = spec(Family::linear);
  cfg.start = StartKind::reversed;
  cfg.eta = cli::race_eta("large");
  cfg.reps = 100;
  cfg.max_epochs = 1000;
  const auto rows = detection_race(cfg, RngStream(root_seed), resolve_threads(0));
  std::vector<real> split, pflug;
  real split_cap = 0.0, pflug_cap = 0.0;
  for (const auto &r : rows) {
    if (r.method == "split") {
      split.push_back(r.detection_epoch);
      split_cap += r.capped;
    } else {
      pflug.push_back(r.detection_epoch);
      pflug_cap += r.capped;
    }
  }
  split_cap /= cfg.reps;
  pflug_cap /= cfg.reps;
  const real ms = median(split), mp = median(pflug);
  return {ms <= mp && pflug_cap >= split_cap,
          "eta=" + fmt("%g", cfg.eta) + ": median epoch split " + fmt("%g", ms) + " vs pflug " + fmt("%g", mp) +
              "; cap rate split " + fmt("%.2f", split_cap) + " vs pflug " + fmt("%.2f", pflug_cap)};
}

// 10 ----------------------------------------------------------------------
Verdict eventual_decay() {
  SplitSgdConfig cfg;
  cfg.eta = 1e-3;
  cfg.t1 = 4 * problem(Family::linear).sample_count();
  cfg.diagnostics = 50;
  // long enough for 50 diagnostics even if none of them returns S
  const std::size_t max_epochs = 50 * (4 + 1) + 10;
  const RngStream root(root_seed);
  int decayed = 0;
  for (std::size_t s = 0; s < 50; ++s) {
    const ParamVector start =
        perturbed_start(spec(Family::linear), StartKind::near_opt, root.fork(stream_ids::init).fork(s));
    const auto out = run_split_detection(problem(Family::linear), cfg, start,
                                         root.fork(stream_ids::optimizer).fork(s), max_epochs);
    decayed += !out.capped();
  }
  return {decayed >= 48, std::to_string(decayed) + "/50 runs with an S event (need >= 48)"};
}

// 11 ----------------------------------------------------------------------
int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "splitsgd");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
  const std::vector<std::vector<std::string>> commands{
      {"compare", "--etas", "1e-3,1e-1", "--seeds", "2", "--epochs", "5", "--t1-epochs", "1"},
      {"race", "--reps", "3", "--max-epochs", "60"},
      {"mc", "--reps", "40"},
      {"mc", "--scenario", "long-burn-in", "--burn-in-epochs", "2", "--reps", "10"},
      {"sensitivity", "--seeds", "1", "--epochs", "3", "--t1-epochs", "1"},
      {"gen-data", "--problem", "logistic"},
      {"run", "--method", "splitsgd", "--epochs", "8", "--eta", "1e-2", "--t1-epochs", "1"},
  };
  std::size_t identical = 0;
  std::string bad;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::string first;
    bool ok = true;
    for (int pass = 0; pass < 2; ++pass) {
      auto args = commands[i];
      const std::string path = "acceptance_det_" + std::to_string(i) + "_" + std::to_string(pass) + ".csv";
      args.insert(args.end(), {"--out", path, "--threads", pass == 0 ? "1" : "2"});
      ok = ok && invoke(args) == 0;
      const std::string body = slurp(path);
      ok = ok && !body.empty();
      if (pass == 0)
        first = body;
      else
        ok = ok && body == first;
    }
    if (ok)
      ++identical;
    else
      bad += " " + commands[i][0];
  }
  return {identical == commands.size(), std::to_string(identical) + "/" + std::to_string(commands.size()) +
                                            " commands byte-identical" + (bad.empty() ? "" : "; differing:" + bad)};
}

} // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 5, gradient_correctness},
      {2, "oracle unbiasedness", 5, oracle_unbiasedness},
      {3, "decision rule brute force", 10, decision_brute_force},
      {4, "small learning rate coherence regime", 120, theorem1_regime},
      {5, "long burn-in coherence regime", 600, theorem2_regime},
      {6, "type-I calculator", 1, type1_calculator},
      {7, "schedule identities", 10, schedule_identities},
      {8, "robustness over the learning-rate grid", 900, robustness},
      {9, "detection race", 1200, diagnostic_race},
      {10, "eventual decay", 300, eventual_decay},
      {11, "CLI determinism", 60, determinism},
  };
  int failures = 0;
  for (const auto &c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception &e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.time_limit_s;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("[%s] %2d %s: %s; %.2fs (limit %gs)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs,
                c.time_limit_s, in_time ? "" : " TIMEOUT");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
