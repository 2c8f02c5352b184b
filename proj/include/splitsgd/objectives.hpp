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

#ifndef SPLITSGD_OBJECTIVES_HPP
#define SPLITSGD_OBJECTIVES_HPP

#include <cmath>
#include <cstddef>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "splitsgd/core.hpp"
#include "splitsgd/format.hpp"

namespace splitsgd {

enum class Family { linear, logistic };

inline std::string_view to_string(Family f) {
  return f == Family::linear ? "linear" : "logistic";
}

inline Family parse_family(std::string_view s) {
  if (s == "linear")
    return Family::linear;
  if (s == "logistic")
    return Family::logistic;
  throw ContractViolation("unknown problem family '" + std::string(s) + "'");
}

/// Synthetic regression task: X with i.i.d. N(0,1) entries, targets drawn
/// from the model at theta_star.
struct ProblemSpec {
  Family family = Family::linear;
  std::size_t n = 1000;
  std::size_t d = 20;
  ParamVector theta_star;
  real noise_sd = 1.0; // linear only
  RngStream data_seed{0, stream_ids::data};

  void validate() const {
    if (n == 0 || d == 0)
      throw ContractViolation("problem needs n > 0 and d > 0");
    if (theta_star.size() != d)
      throw ContractViolation("theta_star dimension must equal d");
    if (!(noise_sd >= 0.0))
      throw ContractViolation("noise_sd must be >= 0");
  }
};

/// theta*_j = 5 exp(-j/2), j = 1..d
inline ParamVector decaying_truth(std::size_t d) {
  ParamVector t(d);
  for (std::size_t j = 1; j <= d; ++j)
    t[j - 1] = 5.0 * std::exp(-static_cast<real>(j) / 2.0);
  return t;
}

/// n = 1000, d = 20, unit noise for the linear family.
inline ProblemSpec make_default_spec(Family family, std::uint64_t seed = 0) {
  ProblemSpec spec;
  spec.family = family;
  spec.n = 1000;
  spec.d = 20;
  spec.theta_star = decaying_truth(spec.d);
  spec.noise_sd = 1.0;
  spec.data_seed = RngStream(seed).fork(stream_ids::data);
  return spec;
}

/// theta_s with theta_{s,j} = 5 exp(-(d-j)/2): the truth in reversed order.
inline ParamVector reversed_start(const ProblemSpec &spec) {
  ParamVector s(spec.d);
  for (std::size_t j = 1; j <= spec.d; ++j)
    s[j - 1] = 5.0 * std::exp(-static_cast<real>(spec.d - j) / 2.0);
  return s;
}

inline ParamVector reversed(const ParamVector &v) {
  return ParamVector(std::vector<real>(v.coords().rbegin(), v.coords().rend()));
}

enum class StartKind { near_opt, reversed };

inline StartKind parse_start(std::string_view s) {
  if (s == "near-opt")
    return StartKind::near_opt;
  if (s == "reversed")
    return StartKind::reversed;
  throw ContractViolation("unknown start '" + std::string(s) + "'");
}

inline std::string_view to_string(StartKind s) {
  return s == StartKind::near_opt ? "near-opt" : "reversed";
}

/// base + eps, eps ~ N(0, 0.01 I).
inline ParamVector perturbed_start(const ProblemSpec &spec, StartKind kind,
                                   RngStream rng) {
  ParamVector theta = kind == StartKind::near_opt ? spec.theta_star : reversed_start(spec);
  for (auto &v : theta)
    v += rng.normal(0.0, 0.1);
  return theta;
}

namespace detail {

inline real sigmoid(real z) {
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  const real e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow
inline real softplus(real z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

} // namespace detail

/// Row-major n x d features plus targets.
class Dataset {
public:
  Dataset(std::size_t n, std::size_t d) : n_(n), d_(d), x_(n * d), y_(n) {}

  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return d_; }

  std::span<const real> row(std::size_t i) const { return {x_.data() + i * d_, d_}; }
  std::span<real> row(std::size_t i) { return {x_.data() + i * d_, d_}; }
  real target(std::size_t i) const { return y_[i]; }
  real &target(std::size_t i) { return y_[i]; }

  friend bool operator==(const Dataset &, const Dataset &) = default;

private:
  std::size_t n_, d_;
  std::vector<real> x_;
  std::vector<real> y_;
};

inline Dataset generate(const ProblemSpec &spec) {
  spec.validate();
  RngStream rng = spec.data_seed;
  Dataset data(spec.n, spec.d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto x = data.row(i);
    for (auto &v : x)
      v = rng.normal();
    const real z = dot(x, spec.theta_star.coords());
    if (spec.family == Family::linear) {
      data.target(i) = z + spec.noise_sd * rng.normal();
    } else {
      data.target(i) = rng.uniform() < detail::sigmoid(z) ? 1.0 : 0.0;
    }
  }
  return data;
}

/// Empirical risk over a dataset. Satisfies the Objective concept: sample()
/// draws one index uniformly with replacement.
class Problem {
public:
  Problem(std::shared_ptr<const Dataset> data, Family family)
      : data_(std::move(data)), family_(family) {}
  Problem(Dataset data, Family family)
      : Problem(std::make_shared<const Dataset>(std::move(data)), family) {}

  static Problem from_spec(const ProblemSpec &spec) {
    return Problem(generate(spec), spec.family);
  }

  const Dataset &data() const noexcept { return *data_; }
  Family family() const noexcept { return family_; }
  std::size_t dimension() const noexcept { return data_->cols(); }
  std::size_t sample_count() const noexcept { return data_->rows(); }

  real datum_loss(std::size_t i, const ParamVector &theta) const {
    const real z = dot(data_->row(i), theta.coords());
    const real y = data_->target(i);
    if (family_ == Family::linear) {
      const real r = z - y;
      return 0.5 * r * r;
    }
    return detail::softplus(z) - y * z;
  }

  /// Gradient of the loss at datum i.
  ParamVector datum_gradient(std::size_t i, const ParamVector &theta) const {
    check_dim(theta);
    const auto x = data_->row(i);
    const real z = dot(x, theta.coords());
    const real y = data_->target(i);
    const real scale = family_ == Family::linear ? z - y : detail::sigmoid(z) - y;
    ParamVector g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      g[j] = scale * x[j];
    return g;
  }

  GradientSample sample(const ParamVector &theta, RngStream &rng) const {
    const auto i = static_cast<std::size_t>(rng.index(sample_count()));
    GradientSample s{datum_gradient(i, theta), std::nullopt};
    if (!s.gradient.all_finite())
      throw NumericError("non-finite stochastic gradient", 0);
    return s;
  }

  real full_loss(const ParamVector &theta) const {
    check_dim(theta);
    real total = 0.0;
    for (std::size_t i = 0; i < sample_count(); ++i)
      total += datum_loss(i, theta);
    const real loss = total / static_cast<real>(sample_count());
    if (!std::isfinite(loss))
      throw NumericError("full loss overflowed", 0);
    return loss;
  }

  ParamVector full_gradient(const ParamVector &theta) const {
    check_dim(theta);
    ParamVector g(dimension());
    for (std::size_t i = 0; i < sample_count(); ++i)
      axpy(1.0, datum_gradient(i, theta), g);
    for (auto &v : g)
      v /= static_cast<real>(sample_count());
    if (!g.all_finite())
      throw NumericError("full gradient overflowed", 0);
    return g;
  }

private:
  void check_dim(const ParamVector &theta) const {
    if (theta.size() != dimension())
      throw ContractViolation("parameter dimension does not match the dataset");
  }

  std::shared_ptr<const Dataset> data_;
  Family family_;
};

inline GradientSample stochastic_gradient(const Problem &problem,
                                          const ParamVector &theta,
                                          RngStream &rng) {
  return problem.sample(theta, rng);
}

/// Wraps an objective so that every sample is the exact full gradient.
template <Objective P>
class NoiselessOracle {
public:
  explicit NoiselessOracle(const P &problem) : problem_(&problem) {}

  std::size_t dimension() const { return problem_->dimension(); }
  std::size_t sample_count() const { return problem_->sample_count(); }
  real full_loss(const ParamVector &theta) const { return problem_->full_loss(theta); }
  GradientSample sample(const ParamVector &theta, RngStream &) const {
    return {problem_->full_gradient(theta), std::nullopt};
  }

private:
  const P *problem_;
};

// ---------------------------------------------------------------------------
// CSV export / import (header x1..xd,y)
// ---------------------------------------------------------------------------

inline void write_csv(std::ostream &os, const Dataset &data) {
  for (std::size_t j = 1; j <= data.cols(); ++j)
    os << 'x' << j << ',';
  os << "y\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (real v : data.row(i))
      os << format_real(v) << ',';
    os << format_real(data.target(i)) << '\n';
  }
}

inline Dataset read_csv(std::istream &is) {
  std::string line;
  if (!std::getline(is, line))
    throw ContractViolation("dataset csv: missing header");
  std::size_t cols = 0;
  for (char c : line)
    cols += c == ',';
  if (cols == 0)
    throw ContractViolation("dataset csv: header needs x1..xd,y");

  std::vector<std::vector<real>> rows;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    std::vector<real> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      vals.push_back(parse_real(cell));
    if (vals.size() != cols + 1)
      throw ContractViolation("dataset csv: ragged row " + std::to_string(rows.size() + 1));
    rows.push_back(std::move(vals));
  }
  Dataset data(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto x = data.row(i);
    std::copy(rows[i].begin(), rows[i].end() - 1, x.begin());
    data.target(i) = rows[i].back();
  }
  return data;
}

} // namespace splitsgd

#endif // SPLITSGD_OBJECTIVES_HPP
