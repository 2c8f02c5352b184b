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

// Command-line front end. Everything lives in this header so the test suites
// can drive run_cli() in-process.

#ifndef SPLITSGD_TOOLS_CLI_HPP
#define SPLITSGD_TOOLS_CLI_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "splitsgd/analysis.hpp"
#include "splitsgd/format.hpp"
#include "splitsgd/objectives.hpp"
#include "splitsgd/optimizers.hpp"

namespace splitsgd::cli {

inline constexpr const char *artifact_version = "1.0.0";
inline constexpr int csv_schema_version = 1;

enum ExitCode : int { ok = 0, failure = 1, usage = 2, numeric = 3 };

/// Race learning rates for --eta-scale.
inline real race_eta(std::string_view scale) {
  if (scale == "large")
    return 1e-2;
  if (scale == "small")
    return 1e-3;
  throw ContractViolation("--eta-scale must be 'large' or 'small'");
}

namespace detail {

inline std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

/// key=value lines; '#' and ';' start comments.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ContractViolation("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';')
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractViolation(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0)
      key.erase(0, 2);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline bool has_flag(const std::vector<std::string> &args, const std::string &key) {
  const std::string flag = "--" + key;
  for (const auto &a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0)
      return true;
  return false;
}

/// Splices config-file entries in front of the command line so explicit flags
/// win over the file and the file wins over built-in defaults.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  // args[0] = program, args[1] = subcommand
  std::string path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty() || args.size() < 2)
    return args;
  std::vector<std::string> injected;
  for (const auto &[key, value] : read_config(path))
    if (!has_flag(args, key))
      injected.push_back("--" + key + "=" + value);
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

inline std::string join(const std::vector<std::string> &v, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      out += sep;
    out += v[i];
  }
  return out;
}

/// Resolved value of every long option of a subcommand, in declaration order.
using Resolved = std::vector<std::pair<std::string, std::string>>;

/// Every option of `sub` with its effective value. `overrides` replaces
/// values that a command derives itself (scenario defaults and the like).
inline Resolved resolved_options(const CLI::App &sub, const Resolved &overrides = {}) {
  Resolved out;
  for (const CLI::Option *opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config")
      continue;
    std::string value;
    if (opt->count() > 0)
      value = opt->get_expected_max() == 0 ? "true" : join(opt->results());
    else
      value = opt->get_expected_max() == 0 ? "false" : opt->get_default_str();
    for (const auto &[k, v] : overrides)
      if (k == name)
        value = v;
    out.emplace_back(name, value);
  }
  return out;
}

inline void write_sidecar(const std::string &out_path, const CLI::App &sub,
                          const Resolved &overrides = {}) {
  std::ofstream meta(out_path + ".meta");
  if (!meta)
    throw std::runtime_error("cannot write metadata sidecar for '" + out_path + "'");
  meta << "artifact=splitsgd\n";
  meta << "artifact_version=" << artifact_version << '\n';
  meta << "schema_version=" << csv_schema_version << '\n';
  meta << "command=" << sub.get_name() << '\n';
  for (const auto &[k, v] : resolved_options(sub, overrides))
    meta << k << '=' << v << '\n';
}

inline std::ofstream open_csv(const std::string &path) {
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

inline real median(std::vector<real> v) {
  if (v.empty())
    return std::numeric_limits<real>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

} // namespace detail

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

inline void write_compare_csv(std::ostream &os, const std::vector<CompareRow> &rows) {
  os << "method,eta,seed,final_log_loss\n";
  for (const auto &r : rows)
    os << to_string(r.method) << ',' << format_real(r.eta) << ',' << r.seed << ','
       << format_real(r.final_log_loss) << '\n';
}

inline void write_race_csv(std::ostream &os, const std::vector<RaceRow> &rows) {
  os << "rep,method,detection_epoch,capped,diverged\n";
  for (const auto &r : rows)
    os << r.rep << ',' << r.method << ',' << format_real(r.detection_epoch) << ','
       << (r.capped ? 1 : 0) << ',' << (r.diverged ? 1 : 0) << '\n';
}

inline void write_histogram_csv(std::ostream &os, const CoherenceHistogram &h) {
  os << "replication,q_value,normalized\n";
  for (const auto &r : h.rows)
    os << r.replication << ',' << format_real(r.q_value) << ',' << format_real(r.normalized)
       << '\n';
}

inline void write_grid_csv(std::ostream &os, const SensitivityGrid &g) {
  os << "w,q,eta,seed,final_log_loss\n";
  for (const auto &r : g.rows)
    os << r.w << ',' << format_real(r.q) << ',' << format_real(r.eta) << ',' << r.seed << ','
       << format_real(r.final_log_loss) << '\n';
}

inline void write_trace_csv(std::ostream &os, const RunTrace &trace) {
  os << "epoch,gradient_evals,learning_rate,full_loss,log_loss,event\n";
  for (const auto &r : trace.records)
    os << r.epoch << ',' << r.gradient_evals << ',' << format_real(r.learning_rate) << ','
       << format_real(r.full_loss) << ',' << format_real(std::log(r.full_loss)) << ','
       << to_string(r.event) << '\n';
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

namespace detail {

/// Split configuration flags shared by several subcommands.
struct SplitFlags {
  SplitDefaults values;

  void attach(CLI::App *sub) {
    sub->add_option("--t1-epochs", values.t1_epochs, "initial thread length in epochs")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--w", values.w, "windows per diagnostic")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--l", values.l, "window length")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--q", values.q, "tolerance proportion")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--gamma", values.gamma, "decay factor")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
  }
};

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::size_t threads = 0;
  std::string problem = "linear";

  void attach(CLI::App *sub, bool needs_out, bool needs_problem = true) {
    sub->add_option("--seed", seed, "root seed")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads (0: SPLITSGD_THREADS or 1)")
        ->capture_default_str();
    if (needs_out)
      sub->add_option("--out", out, "output CSV path")->required();
    if (needs_problem)
      sub->add_option("--problem", problem, "linear | logistic")
          ->capture_default_str()
          ->check(CLI::IsMember({"linear", "logistic"}));
  }

  ProblemSpec spec() const { return make_default_spec(parse_family(problem), seed); }
  RngStream root() const { return RngStream(seed); }
  std::size_t workers() const { return resolve_threads(threads); }
};

} // namespace detail

/**
 * Runs the `splitsgd` command line. Exit codes: 0 success (recorded
 * divergences included), 2 usage error, 3 numeric failure, 1 anything else.
 */
inline int run_cli(int argc, const char *const *argv, std::ostream &out = std::cout,
                   std::ostream &err = std::cerr) {
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"SplitSGD experiments: stationarity diagnostics and learning-rate schedules"};
  app.name("splitsgd");
  app.require_subcommand(1);
  std::function<int()> action;

  // compare ---------------------------------------------------------------
  detail::Common compare_common;
  detail::SplitFlags compare_split;
  std::vector<real> compare_etas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<std::string> compare_method_names{"splitsgd", "const", "sqrt", "half"};
  std::size_t compare_epochs = 100, compare_seeds = 20;
  std::string compare_start = "reversed";
  {
    auto *sub = app.add_subcommand("compare", "final log-loss of SplitSGD and baselines");
    compare_common.attach(sub, true);
    compare_split.attach(sub);
    sub->add_option("--etas", compare_etas, "initial learning rates")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--methods", compare_method_names, "splitsgd,const,sqrt,half")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--epochs", compare_epochs)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--seeds", compare_seeds)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--start", compare_start, "near-opt | reversed")
        ->capture_default_str()
        ->check(CLI::IsMember({"near-opt", "reversed"}));
    sub->callback([&, sub] {
      action = [&, sub] {
        CompareConfig cfg;
        cfg.problem = compare_common.spec();
        cfg.start = parse_start(compare_start);
        cfg.etas = compare_etas;
        cfg.methods.clear();
        for (const auto &m : compare_method_names)
          cfg.methods.push_back(parse_method(m));
        for (real eta : cfg.etas)
          if (!(eta >= 0.0))
            throw ContractViolation("--etas must be >= 0");
        cfg.seeds = compare_seeds;
        cfg.budget_epochs = compare_epochs;
        cfg.split = compare_split.values;
        const auto rows = compare_methods(cfg, compare_common.root(), compare_common.workers());
        auto os = detail::open_csv(compare_common.out);
        write_compare_csv(os, rows);
        detail::write_sidecar(compare_common.out, *sub);
        out << "wrote " << rows.size() << " rows to " << compare_common.out << '\n';
        return int(ok);
      };
    });
  }

  // race -----------------------------------------------------------------
  detail::Common race_common;
  detail::SplitFlags race_split;
  std::string race_start = "reversed", race_scale = "large";
  real race_eta_override = 0.0;
  std::size_t race_reps = 100, race_max_epochs = 1000;
  {
    auto *sub = app.add_subcommand("race", "splitting vs pflug detection epochs");
    race_common.attach(sub, true);
    race_split.attach(sub);
    sub->add_option("--start", race_start)
        ->capture_default_str()
        ->check(CLI::IsMember({"near-opt", "reversed"}));
    sub->add_option("--eta-scale", race_scale, "large (1e-2) | small (1e-3)")
        ->capture_default_str()
        ->check(CLI::IsMember({"large", "small"}));
    sub->add_option("--eta", race_eta_override, "explicit learning rate (overrides --eta-scale)");
    sub->add_option("--reps", race_reps)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--max-epochs", race_max_epochs)
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->callback([&, sub] {
      action = [&, sub] {
        RaceConfig cfg;
        cfg.problem = race_common.spec();
        cfg.start = parse_start(race_start);
        cfg.eta = sub->count("--eta") ? race_eta_override : race_eta(race_scale);
        if (!(cfg.eta > 0.0))
          throw ContractViolation("--eta must be positive");
        cfg.reps = race_reps;
        cfg.max_epochs = race_max_epochs;
        cfg.split = race_split.values;
        const auto rows = detection_race(cfg, race_common.root(), race_common.workers());
        auto os = detail::open_csv(race_common.out);
        write_race_csv(os, rows);
        detail::write_sidecar(race_common.out, *sub, {{"eta", format_real(cfg.eta)}});
        for (std::string_view m : {"split", "pflug"}) {
          std::vector<real> epochs;
          std::size_t capped = 0;
          for (const auto &r : rows)
            if (r.method == m) {
              epochs.push_back(r.detection_epoch);
              capped += r.capped;
            }
          out << m << ": median detection epoch " << format_real(detail::median(epochs))
              << ", cap rate " << format_real(static_cast<real>(capped) / epochs.size()) << '\n';
        }
        return int(ok);
      };
    });
  }

  // mc -------------------------------------------------------------------
  detail::Common mc_common;
  std::string mc_scenario = "small-eta", mc_start = "reversed";
  real mc_eta = 0.0;
  std::size_t mc_burn_in = 0, mc_reps = 500, mc_window = 2, mc_w = 20, mc_l = 50;
  bool mc_raw = false, mc_noiseless = false;
  {
    auto *sub = app.add_subcommand("mc", "Monte-Carlo histogram of one gradient coherence");
    mc_common.attach(sub, true);
    sub->add_option("--scenario", mc_scenario,
                    "small-eta (eta 1e-4, no burn-in) | long-burn-in (eta 1e-2, 200 epochs)")
        ->capture_default_str()
        ->check(CLI::IsMember({"small-eta", "long-burn-in"}));
    sub->add_option("--eta", mc_eta, "override the scenario learning rate");
    sub->add_option("--burn-in-epochs", mc_burn_in, "override the scenario burn-in");
    sub->add_option("--start", mc_start)
        ->capture_default_str()
        ->check(CLI::IsMember({"near-opt", "reversed"}));
    sub->add_option("--reps", mc_reps)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--window-index", mc_window, "1-based window to record")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--w", mc_w)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--l", mc_l)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_flag("--raw", mc_raw, "summarize raw Q instead of the cosine-normalized value");
    sub->add_flag("--noiseless", mc_noiseless, "use the exact full gradient as the oracle");
    sub->callback([&, sub] {
      action = [&, sub] {
        CoherenceStudy study;
        study.problem = mc_common.spec();
        study.start = parse_start(mc_start);
        const bool long_burn = mc_scenario == "long-burn-in";
        const std::size_t n = study.problem.n;
        study.eta = sub->count("--eta") ? mc_eta : (long_burn ? 1e-2 : 1e-4);
        study.burn_in_steps = (sub->count("--burn-in-epochs") ? mc_burn_in : (long_burn ? 200 : 0)) * n;
        study.w = mc_w;
        study.l = mc_l;
        study.window_index = mc_window;
        study.replications = mc_reps;
        study.normalized = !mc_raw;
        const Problem problem = Problem::from_spec(study.problem);
        const RngStream rng = mc_common.root().fork(stream_ids::replications);
        const CoherenceHistogram h =
            mc_noiseless
                ? coherence_histogram(NoiselessOracle<Problem>(problem), study, rng, mc_common.workers())
                : coherence_histogram(problem, study, rng, mc_common.workers());
        auto os = detail::open_csv(mc_common.out);
        write_histogram_csv(os, h);
        detail::write_sidecar(mc_common.out, *sub,
                              {{"eta", format_real(study.eta)},
                               {"burn-in-epochs", std::to_string(study.burn_in_steps / n)}});
        out << "replications " << h.summary.count << " (diverged " << h.summary.diverged
            << "), mean " << format_real(h.summary.mean) << ", sd " << format_real(h.summary.sd)
            << ", negative fraction " << format_real(h.summary.negative_fraction) << '\n';
        return int(ok);
      };
    });
  }

  // qrisk ----------------------------------------------------------------
  std::size_t qrisk_w = 20;
  real qrisk_q = 0.4;
  {
    auto *sub = app.add_subcommand("qrisk", "type-I error probability of the decision rule");
    sub->add_option("--w", qrisk_w)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--q", qrisk_q)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    sub->callback([&] {
      action = [&] {
        const real p = type1_error_probability({qrisk_w, qrisk_q});
        out << std::setprecision(6) << p << '\n';
        return int(ok);
      };
    });
  }

  // sensitivity ----------------------------------------------------------
  detail::Common sens_common;
  detail::SplitFlags sens_split;
  std::vector<std::size_t> sens_w{10, 20, 40};
  std::vector<real> sens_q{0.35, 0.40, 0.45};
  std::vector<real> sens_etas{1e-3};
  std::size_t sens_seeds = 5, sens_epochs = 100;
  std::string sens_start = "reversed";
  {
    auto *sub = app.add_subcommand("sensitivity", "(w, q) grid of SplitSGD final log-loss");
    sens_common.attach(sub, true);
    sens_split.attach(sub);
    sub->add_option("--w-values", sens_w)->delimiter(',')->capture_default_str();
    sub->add_option("--q-values", sens_q)->delimiter(',')->capture_default_str();
    sub->add_option("--etas", sens_etas)->delimiter(',')->capture_default_str();
    sub->add_option("--seeds", sens_seeds)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--epochs", sens_epochs)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--start", sens_start)
        ->capture_default_str()
        ->check(CLI::IsMember({"near-opt", "reversed"}));
    sub->callback([&, sub] {
      action = [&, sub] {
        SensitivityConfig cfg;
        cfg.problem = sens_common.spec();
        cfg.start = parse_start(sens_start);
        cfg.base = sens_split.values;
        cfg.w_values = sens_w;
        cfg.q_values = sens_q;
        for (real q : cfg.q_values)
          if (!(q >= 0.0 && q <= 1.0))
            throw ContractViolation("--q-values must lie in [0, 1]");
        for (real eta : sens_etas)
          if (!(eta > 0.0))
            throw ContractViolation("--etas must be positive");
        cfg.etas = sens_etas;
        cfg.seeds = sens_seeds;
        cfg.budget_epochs = sens_epochs;
        const SensitivityGrid grid = sensitivity_grid(cfg, sens_common.root(), sens_common.workers());
        auto os = detail::open_csv(sens_common.out);
        write_grid_csv(os, grid);
        detail::write_sidecar(sens_common.out, *sub);
        out << "w,l,q,eta,mean_final_log_loss\n";
        for (const auto &c : grid.cells)
          out << c.w << ',' << c.l << ',' << format_real(c.q) << ',' << format_real(c.eta) << ','
              << format_real(c.mean_final_log_loss) << '\n';
        return int(ok);
      };
    });
  }

  // gen-data -------------------------------------------------------------
  detail::Common gen_common;
  std::size_t gen_n = 1000, gen_d = 20;
  real gen_noise = 1.0;
  {
    auto *sub = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
    gen_common.attach(sub, true);
    sub->add_option("--n", gen_n)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--d", gen_d)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--noise-sd", gen_noise)->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->callback([&, sub] {
      action = [&, sub] {
        ProblemSpec spec = gen_common.spec();
        spec.n = gen_n;
        spec.d = gen_d;
        spec.theta_star = decaying_truth(gen_d);
        spec.noise_sd = gen_noise;
        const Dataset data = generate(spec);
        auto os = detail::open_csv(gen_common.out);
        write_csv(os, data);
        detail::write_sidecar(gen_common.out, *sub);
        return int(ok);
      };
    });
  }

  // run ------------------------------------------------------------------
  detail::Common run_common;
  detail::SplitFlags run_split;
  std::string run_method_name = "splitsgd", run_start = "reversed";
  real run_eta = 1e-3, run_momentum = 0.0;
  std::size_t run_epochs = 100;
  long long run_diagnostics = -1;
  {
    auto *sub = app.add_subcommand("run", "one optimizer run, per-epoch trace as CSV");
    run_common.attach(sub, true);
    run_split.attach(sub);
    sub->add_option("--method", run_method_name, "splitsgd | const | sqrt | half")
        ->capture_default_str()
        ->check(CLI::IsMember({"splitsgd", "const", "sqrt", "half"}));
    sub->add_option("--eta", run_eta)->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--epochs", run_epochs)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--start", run_start)
        ->capture_default_str()
        ->check(CLI::IsMember({"near-opt", "reversed"}));
    sub->add_option("--diagnostics", run_diagnostics, "SplitSGD diagnostic count B (-1: unlimited)")
        ->capture_default_str();
    sub->add_option("--momentum", run_momentum, "momentum coefficient (splitsgd/const)")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.999999));
    sub->callback([&, sub] {
      action = [&, sub] {
        const ProblemSpec spec = run_common.spec();
        const Problem problem = Problem::from_spec(spec);
        const RngStream root = run_common.root();
        const ParamVector theta0 =
            perturbed_start(spec, parse_start(run_start), root.fork(stream_ids::init).fork(0));
        const RngStream rng = root.fork(stream_ids::optimizer).fork(0);
        const RunOptions opts{run_epochs, true};
        const OptimizerKernel kernel = run_momentum > 0.0 ? OptimizerKernel::momentum(run_momentum)
                                                          : OptimizerKernel::plain();
        RunTrace trace;
        switch (parse_method(run_method_name)) {
        case Method::splitsgd: {
          SplitSgdConfig cfg = run_split.values.config(run_eta, problem.sample_count());
          if (run_diagnostics >= 0)
            cfg.diagnostics = static_cast<std::size_t>(run_diagnostics);
          cfg.kernel = kernel;
          trace = run_splitsgd(problem, cfg, theta0, rng, opts).trace;
          break;
        }
        case Method::constant:
          trace = run_constant_sgd(problem, run_eta, theta0, rng, opts, kernel);
          break;
        case Method::sqrt_decay:
          trace = run_sqrt_decay_sgd(problem, run_eta, theta0, rng, opts);
          break;
        case Method::half:
          trace = run_sgd_half(problem, run_eta,
                               run_split.values.t1_epochs * problem.sample_count(), theta0, rng,
                               opts);
          break;
        }
        auto os = detail::open_csv(run_common.out);
        write_trace_csv(os, trace);
        detail::write_sidecar(run_common.out, *sub);
        out << "final log loss " << format_real(trace.final_log_loss()) << '\n';
        return int(ok);
      };
    });
  }

  try {
    args = detail::expand_config(std::move(args));
    std::vector<const char *> cargs;
    for (const auto &a : args)
      cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp &e) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const ContractViolation &e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }

  try {
    return action ? action() : int(usage);
  } catch (const ContractViolation &e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const NumericError &e) {
    err << "numeric error: " << e.what() << '\n';
    return numeric;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return failure;
  }
}

} // namespace splitsgd::cli

#endif // SPLITSGD_TOOLS_CLI_HPP
