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

#ifndef SPLITSGD_PARALLEL_HPP
#define SPLITSGD_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace splitsgd {

/// Worker count: explicit value if nonzero, else SPLITSGD_THREADS, else 1.
inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0)
    return requested;
  if (const char *env = std::getenv("SPLITSGD_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0)
        return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return 1;
}

/**
 * Calls fn(i) for i in [0, count) on up to `threads` workers. Work items must
 * write only to their own output slot. If items throw, the exception of the
 * lowest failing index is rethrown after all workers have joined, so the
 * outcome does not depend on scheduling.
 */
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn &&fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](std::atomic<std::size_t> &next) {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::atomic<std::size_t> next{0};
  if (threads == 1) {
    body(next);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] { body(next); });
    for (auto &th : pool)
      th.join();
  }
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace splitsgd

#endif // SPLITSGD_PARALLEL_HPP
