#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sigsde {

namespace detail {
inline std::atomic<unsigned>& worker_setting() {
  static std::atomic<unsigned> n{0};
  return n;
}
}  // namespace detail

/// Worker count used by parallel_for. 0 means hardware concurrency.
inline void set_workers(unsigned n) { detail::worker_setting() = n; }

inline unsigned workers() {
  unsigned n = detail::worker_setting();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs body(i) for i in [0, n). Each index is visited exactly once and
/// callers write results into per-index slots, so output never depends on
/// scheduling. The first exception thrown by any index is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned w = static_cast<unsigned>(std::min<std::size_t>(workers(), n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(w - 1);
  for (unsigned t = 1; t < w; ++t) pool.emplace_back(run);
  run();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace sigsde
