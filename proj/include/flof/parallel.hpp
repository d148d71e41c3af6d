#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace flof {

// Worker count: FLOF_THREADS if set and positive, otherwise the hardware count.
inline int thread_count() {
  if (const char* env = std::getenv("FLOF_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Ranges are split into fixed-size chunks so the partition (and therefore any
// reduction order) never depends on the number of threads.
inline constexpr std::size_t kChunk = 4096;

template <class Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const int workers = static_cast<int>(std::min<std::size_t>(thread_count(), chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers)
          fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

// Calls fn(i) for i in [0, n).
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

// Deterministic sum of fn(i): per-chunk partials combined in chunk order.
template <class Fn>
double parallel_sum(std::size_t n, Fn&& fn) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
  parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += fn(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace flof
