#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ontoext {

// Runs fn(i) for i in [0, count) across `workers` threads. Results must be
// written by fn into caller-owned slots indexed by i, which keeps output
// order independent of scheduling. The first exception (by slot index) is
// rethrown after all threads join.
template <typename Fn>
void run_parallel(std::size_t count, int workers, Fn&& fn) {
  if (count == 0) return;
  std::size_t pool = workers > 1 ? std::min<std::size_t>(workers, count) : 1;
  if (pool == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (std::size_t t = 0; t < pool; ++t) {
    threads.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& thread : threads) thread.join();
  for (const std::exception_ptr& error : errors)
    if (error) std::rethrow_exception(error);
}

}  // namespace ontoext
