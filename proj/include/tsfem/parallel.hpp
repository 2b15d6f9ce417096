#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace tsfem {

/// Worker count: TSFEM_THREADS when set to a positive integer, else the
/// hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("TSFEM_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls fn(first, last) on disjoint contiguous chunks of [begin, end).
/// Chunk boundaries depend only on the range and the worker count, so any
/// per-index computation that does not read other indices is reproducible.
template <class Fn>
void parallel_for_chunks(std::size_t begin, std::size_t end, Fn&& fn,
                         std::size_t workers = worker_count()) {
  if (end <= begin) return;
  const std::size_t n = end - begin;
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) {
    fn(begin, end);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tsfem
