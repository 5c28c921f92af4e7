#ifndef RELAXCTRL_PARALLEL_HPP
#define RELAXCTRL_PARALLEL_HPP

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace relaxctrl {

/// Thread cap for atom/cell scans, from RELAXCTRL_THREADS (default 1).
inline int thread_budget() {
  const char* env = std::getenv("RELAXCTRL_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  if (v < 1) return 1;
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  return hw > 0 ? std::min(v, hw) : v;
}

/// Runs fn(i) for i in [0, count). Each index is processed exactly once and
/// writes only its own output slot, so the result does not depend on the
/// thread count.
inline void parallel_index_for(int count,
                               const std::function<void(int)>& fn) {
  const int threads = std::min(thread_budget(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int tid = 0; tid < threads; ++tid) {
    pool.emplace_back([&, tid] {
      for (int i = tid; i < count; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace relaxctrl

#endif
