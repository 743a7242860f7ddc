#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cpe {

/// Process-wide worker count used by the block runner. Results never depend on it.
void set_worker_count(unsigned workers);
unsigned worker_count();

/// Runs fn(block) for block in [0, n_blocks). Blocks are claimed dynamically,
/// so callers must write results into per-block slots and reduce them in
/// block order afterwards.
template <class Fn>
void for_each_block(std::size_t n_blocks, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n_blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < n_blocks; b = next++) {
          try {
            fn(b);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n_blocks;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

inline std::size_t block_count(std::size_t items, std::size_t block_size) {
  return (items + block_size - 1) / block_size;
}

}  // namespace cpe
