#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pnp {

/// Number of workers for jobs <= 0: hardware concurrency (at least 1).
inline std::size_t resolve_jobs(int jobs) {
  if (jobs > 0) return static_cast<std::size_t>(jobs);
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i, worker) for i in [0, n) on up to `workers` threads. Items are claimed dynamically, so
/// results must be written to per-item slots; the first exception is rethrown after all workers join.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& fn) {
  workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i, w);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pnp
