#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace ratecert {

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Exceptions are
/// collected per index and the first one in index order is rethrown.
template <typename Body>
void ParallelFor(int count, int jobs, Body body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  const int workers = std::max(1, std::min(jobs, count));
  std::atomic<int> next{0};
  auto run = [&]() {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace ratecert
