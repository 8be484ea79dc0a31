// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace urnlab {

/// Thread count to use for a request of `requested` (<= 0 means "all").
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, items) into fixed blocks of `block_size`, evaluates
/// `fn(begin, end)` for each block on up to `threads` workers and returns
/// the block results in block order. The block layout does not depend on
/// the thread count, so an ordered fold over the result is reproducible
/// for any degree of parallelism.
template <class Result, class BlockFn>
std::vector<Result> run_blocks(std::int64_t items, std::int64_t block_size,
                               int threads, BlockFn&& fn) {
  if (items <= 0) return {};
  block_size = std::max<std::int64_t>(block_size, 1);
  const std::int64_t blocks = (items + block_size - 1) / block_size;
  std::vector<Result> results(static_cast<std::size_t>(blocks));

  const int workers = static_cast<int>(
      std::min<std::int64_t>(resolve_threads(threads), blocks));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::int64_t b = next.fetch_add(1);
      if (b >= blocks) return;
      const std::int64_t begin = b * block_size;
      const std::int64_t end = std::min(items, begin + block_size);
      try {
        results[static_cast<std::size_t>(b)] = fn(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace urnlab
