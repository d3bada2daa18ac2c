#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lpca {

/// Worker cap shared by the data-parallel loops. 0 means all available cores.
struct Threads {
  unsigned count = 0;

  unsigned resolve() const {
    if (count > 0) return count;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

/// Runs fn(k) for k in [0, n). Each index is handled by exactly one worker and
/// callers write into per-index slots, so results never depend on the
/// schedule. The first exception thrown by any worker is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Threads threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(threads.resolve(), n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += workers) fn(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace lpca
