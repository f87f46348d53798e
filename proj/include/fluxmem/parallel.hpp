// Copyright 2026 The fluxmem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace fluxmem {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap = [] {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FLUXMEM_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
      } catch (...) {
        // Ignore malformed values and keep the hardware default.
      }
    }
    return n;
  }();
  return cap;
}
}  // namespace detail

// Upper bound on worker threads for internal kernels. Initialised from
// FLUXMEM_THREADS (capped at hardware concurrency).
inline unsigned max_threads() { return detail::thread_cap().load(std::memory_order_relaxed); }
inline void set_max_threads(unsigned n) {
  detail::thread_cap().store(std::max(1u, n), std::memory_order_relaxed);
}

// Runs fn(begin, end) over [0, n) in contiguous chunks. Work items must be
// independent; results are then identical for every thread count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t min_chunk, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(max_threads(), min_chunk == 0 ? n : n / std::max<std::size_t>(1, min_chunk));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
}

}  // namespace fluxmem
