#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace corpusforge {

/// Runs fn(block_index, begin, end) over [0, n) cut into fixed-size blocks.
/// Block boundaries depend only on n and block_size, never on the worker
/// count, so per-block results merged in block order are worker-invariant.
template <class Fn>
void for_each_block(std::size_t n, std::size_t block_size, unsigned workers, Fn&& fn) {
  if (n == 0) return;
  block_size = std::max<std::size_t>(block_size, 1);
  const std::size_t blocks = (n + block_size - 1) / block_size;
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(workers, 1u), blocks));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto run = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        const std::size_t begin = b * block_size;
        fn(b, begin, std::min(n, begin + block_size));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
      }
    }
  };

  if (threads == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(run);
    run();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Per-index convenience wrapper: fn(i) for every i in [0, n).
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn, std::size_t block_size = 64) {
  for_each_block(n, block_size, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace corpusforge
