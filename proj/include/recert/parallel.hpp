#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "recert/core_types.hpp"

namespace recert {

// Runs fn(i) for i in [0, count) across the given number of workers.  Each
// index is processed exactly once and fn must write its result into a
// pre-sized slot, so the reduction order (by index) is independent of the
// worker count.  Exceptions are rethrown on the calling thread.
inline void parallel_for_indexed(Index count, int workers,
                                 const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  const int usable = std::max(
      1, std::min<int>(workers, static_cast<int>(count)));
  if (usable == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(usable));
  std::atomic<Index> next{0};
  for (int w = 0; w < usable; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const Index i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace recert
