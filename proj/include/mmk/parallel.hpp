#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mmk {

/// Worker cap from MMK_THREADS (default: hardware concurrency, at least 1).
inline int workerCount() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("MMK_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return std::min(v, hw * 4);
  }
  return hw;
}

/// Runs f(i) for i in [0, n); the first exception is rethrown after joining.
template <typename F>
void parallelFor(std::size_t n, F&& f) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workerCount()), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex errorMutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(errorMutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

} // namespace mmk
