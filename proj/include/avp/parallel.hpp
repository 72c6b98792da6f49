#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace avp {

/// Process-wide worker count used by parallel_for (0 = hardware concurrency).
inline std::atomic<unsigned>& thread_override() {
  static std::atomic<unsigned> n{0};
  return n;
}

inline unsigned effective_threads() {
  const unsigned n = thread_override().load();
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs body(i) for i in [0, n). Work items must write to disjoint state so
/// results do not depend on the thread count. Exceptions are rethrown on the
/// calling thread.
template <class F>
void parallel_for(std::size_t n, F&& body, unsigned threads = 0) {
  if (n == 0) return;
  unsigned workers = threads > 0 ? threads : effective_threads();
  if (workers > n) workers = static_cast<unsigned>(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&] {
    std::size_t i;
    while ((i = next.fetch_add(1)) < n) {
      if (failed.load(std::memory_order_relaxed)) return;
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace avp
