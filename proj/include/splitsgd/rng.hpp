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

#ifndef SPLITSGD_RNG_HPP
#define SPLITSGD_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace splitsgd {

namespace detail {

// SplitMix64 finalizer (Steele, Lea, Flood).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

} // namespace detail

/**
 * Splittable random stream identified by (seed, stream id).
 *
 * The draw sequence is a pure function of the pair, so results replay
 * bit-for-bit. fork() derives a child id by hashing, leaving the parent's
 * position untouched, which lets independent consumers (diagnostic threads,
 * Monte-Carlo replications) be keyed by index instead of by draw order.
 *
 * The engine is xoshiro256** seeded through SplitMix64. Normal deviates use
 * the Marsaglia polar method and index draws use Lemire's unbiased bounded
 * multiply, so nothing depends on the standard library's distribution
 * implementations.
 */
class RngStream {
public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {
    std::uint64_t x = seed ^ detail::rotl(detail::mix64(stream_id + detail::golden_gamma), 23);
    for (auto &s : state_) {
      x += detail::golden_gamma;
      s = detail::mix64(x);
    }
    // all-zero state is the one forbidden state of xoshiro
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
      state_[0] = detail::golden_gamma;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream positioned at its own start; same arguments give the same
  /// stream.
  RngStream fork(std::uint64_t child_id) const {
    const std::uint64_t id =
        detail::mix64(stream_id_ * 0xd1342543de82ef95ULL + detail::mix64(child_id ^ 0x5851f42d4c957f2dULL));
    return RngStream(seed_, id);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t index(std::uint64_t bound) noexcept {
    if (bound <= 1)
      return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream-id namespaces inside one experiment. Data generation, start-point
/// noise and the optimizer's draws never share a stream.
namespace stream_ids {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t optimizer = 3;
inline constexpr std::uint64_t replications = 4;
} // namespace stream_ids

inline RngStream fork_stream(const RngStream &parent, std::uint64_t child_id) {
  return parent.fork(child_id);
}

} // namespace splitsgd

#endif // SPLITSGD_RNG_HPP
