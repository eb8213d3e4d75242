#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace qmix {

// Run body(0), ..., body(count-1) over a fixed interleaved schedule.
// Workers own disjoint index sets, so as long as the body only writes
// state keyed by its index the result cannot depend on thread timing.
// The first exception thrown by any worker is rethrown after the join.
inline void parallel_for(int count, const std::function<void(int)>& body, int threads = 0) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers > count) workers = count;
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace qmix
