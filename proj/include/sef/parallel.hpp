#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace sef {

// Worker count for inference passes, from SEF_WORKERS (default 1). Results
// are written to per-index slots, so the worker count never changes output.
inline int worker_count() {
  const char* env = std::getenv("SEF_WORKERS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int workers = worker_count();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t stride = static_cast<std::size_t>(workers);
  for (std::size_t w = 0; w < stride; ++w) {
    pool.emplace_back([&fn, w, n, stride] {
      for (std::size_t i = w; i < n; i += stride) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sef
