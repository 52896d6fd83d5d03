#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace splitfilter {

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
// results are identical for any worker count. workers == 0 picks the
// hardware concurrency.
inline void parallel_for(int n, const std::function<void(int)>& fn, int workers = 0) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  if (workers > n) workers = n;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace splitfilter
