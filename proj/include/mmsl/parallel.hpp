// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_PARALLEL_HPP
#define MMSL_PARALLEL_HPP

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mmsl {

/// Worker count resolved from an explicit request: n > 0 uses n threads,
/// n == 0 uses the hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Worker count from the MMSL_THREADS environment variable (0 or unset = auto).
inline int env_threads() {
  const char* raw = std::getenv("MMSL_THREADS");
  if (!raw || !*raw) return resolve_threads(0);
  return resolve_threads(std::atoi(raw));
}

/// Runs fn(i) for every i in [0, count) across up to `threads` workers.
/// Callers must key any randomness by i so the result is order-independent.
/// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (count == 0) return;
  if (threads <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  const auto workers = static_cast<std::size_t>(threads) < count
                           ? static_cast<std::size_t>(threads)
                           : count;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mmsl

#endif  // MMSL_PARALLEL_HPP
