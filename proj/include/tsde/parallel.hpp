#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tsde {

// Path-level parallelism. Work items are independent and write to
// preallocated, index-addressed slots, so the thread count and chunk shape
// can never change results — only wall time.

/// Runs fn(begin, end) over a partition of [0, n) on up to n_threads threads.
/// The first exception thrown by any chunk is rethrown in the caller.
template <class Fn>
void parallel_for(std::int64_t n, int n_threads, Fn&& fn) {
  if (n <= 0) return;
  const int workers = int(std::max<std::int64_t>(1, std::min<std::int64_t>(n_threads, n)));
  if (workers == 1) {
    fn(std::int64_t{0}, n);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto guarded = [&](std::int64_t b, std::int64_t e) {
    try {
      fn(b, e);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers - 1));
  for (int w = 1; w < workers; ++w) {
    const std::int64_t b = std::min<std::int64_t>(w * chunk, n);
    const std::int64_t e = std::min<std::int64_t>(b + chunk, n);
    if (b < e) pool.emplace_back(guarded, b, e);
  }
  guarded(0, std::min<std::int64_t>(chunk, n));
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tsde
