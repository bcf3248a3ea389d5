#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mpbt {

// Runs body(i) for i in [0, n) across up to max_threads workers
// (hardware concurrency when max_threads == 0). Falls back to a plain
// loop when one worker suffices, so single-core machines pay nothing.
//
// Determinism contract: body(i) must depend only on i (callers derive
// per-index RNG streams), so results are identical for any thread count.
inline void parallel_for(std::int64_t n,
                         const std::function<void(std::int64_t)>& body,
                         int max_threads = 0) {
  if (n <= 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::int64_t workers = static_cast<std::int64_t>(
      max_threads > 0 ? static_cast<unsigned>(max_threads) : hw);
  if (workers > n) workers = n;
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::int64_t> cursor{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      std::int64_t i = cursor.fetch_add(1, std::memory_order_relaxed);
      if (i >= n || failed.load(std::memory_order_relaxed)) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mpbt
