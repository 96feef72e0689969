#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace dcpl {

// Worker count from DCPL_THREADS: unset -> 1, 0 -> hardware concurrency.
std::size_t configured_threads();

// Runs body(i) for i in [0, n). Each index must write only its own output
// slot; callers reduce afterwards in index order so results never depend on
// the thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_per_thread = 256) {
  const std::size_t threads =
      std::min(configured_threads(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_per_thread)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
}

}  // namespace dcpl
