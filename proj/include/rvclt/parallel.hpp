#ifndef RVCLT_PARALLEL_HPP
#define RVCLT_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rvclt {

// Worker count: hardware concurrency capped by RVCLT_THREADS.
inline unsigned thread_budget() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("RVCLT_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1 && static_cast<unsigned long>(cap) < hw) hw = static_cast<unsigned>(cap);
  }
  return hw;
}

// Runs fn(i) for i in [0, count). Each index is processed exactly once and
// results must be written to slots indexed by i, so the outcome is identical
// for every thread count (the determinism contract of the experiment runner).
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned threads = std::min<std::size_t>(thread_budget(), std::max<std::size_t>(count, 1));
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr error;
  std::mutex error_mutex;
  // Static contiguous partition: cache-friendly and free of scheduling order.
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = count * t / threads;
    const std::size_t hi = count * (t + 1) / threads;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Neumaier compensated sum; used wherever an aggregation result feeds a
// byte-identical output file.
inline double compensated_sum(const std::vector<double>& xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace rvclt

#endif  // RVCLT_PARALLEL_HPP
