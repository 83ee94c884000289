#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace polylab {

inline unsigned hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Runs body(i) for i in [0, n). Each index is visited exactly once; bodies
// must only write to their own slot so results do not depend on the thread
// count. Reductions happen after the join, in index order.
template <typename Body>
void parallel_for(std::size_t n, const Body& body, unsigned n_threads = 0) {
  if (n == 0) return;
  if (n_threads == 0) n_threads = hardware_threads();
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  const std::size_t chunk = (n + n_threads - 1) / n_threads;
  for (unsigned w = 0; w < n_threads; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace polylab
