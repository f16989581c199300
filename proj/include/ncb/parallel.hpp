#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace ncb {

inline int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Global worker count used by parallel loops; set once from the CLI.
inline int& thread_count() {
  static int n = default_threads();
  return n;
}

// Runs body(i) for i in [0, n). Work is claimed by atomic chunks, so the
// assignment of indices to threads is nondeterministic, but callers that
// write only to slot i (and reduce serially afterwards) get results that
// are independent of the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, int threads = 0) {
  if (threads <= 0) threads = thread_count();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t chunk = std::max<std::size_t>(1, n / (8 * threads));
  auto worker = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      const std::size_t end = std::min(n, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

// Deterministic parallel sum: evaluates term(i), stores per-index partials,
// reduces in index order. The result is bitwise independent of threading.
template <class Term>
double parallel_sum(std::size_t n, Term&& term, int threads = 0) {
  std::vector<double> slot(n);
  parallel_for(n, [&](std::size_t i) { slot[i] = term(i); }, threads);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += slot[i];
  return acc;
}

}  // namespace ncb
