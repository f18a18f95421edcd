#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace qtomo::detail {

// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware).
// Work items are claimed dynamically; callers write results by index.
template <typename Body>
void parallel_for(int count, int threads, Body&& body) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(count, 1));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
  }
}

}  // namespace qtomo::detail
