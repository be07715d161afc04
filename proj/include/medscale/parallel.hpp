#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace medscale {

/// Runs `task(i)` for every i in [0, count) on at most `threads` workers.
///
/// Tasks must write only to state owned by index i; the caller reduces the
/// results by index afterwards, so output never depends on scheduling. If any
/// tasks throw, the exception of the lowest failing index is rethrown after all
/// workers have joined.
template <typename Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task) {
  if (count == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, count);
  std::vector<std::exception_ptr> errors(count);

  auto run = [&](std::size_t i) {
    try {
      task(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) run(i);
      });
    }
  }

  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace medscale
