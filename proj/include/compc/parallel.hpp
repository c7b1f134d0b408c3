#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace compc {

// Runs fn(i) for i in [0, n) over a static partition of worker threads.
// Callers write results into per-index slots and reduce afterwards in index
// order, which keeps every reduction independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace compc
