#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lrplab {

/// Calls fn(i) for i in [0, count) on up to `jobs` worker threads. Work is
/// handed out through a shared counter; fn must write only to slot i of its
/// output. The first exception thrown by any job is rethrown here.
template <class Fn>
void parallel_for_index(std::uint64_t count, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, jobs);
  if (jobs == 1 || count <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::uint64_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n_threads = static_cast<unsigned>(std::min<std::uint64_t>(jobs, count));
  pool.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) {
    pool.emplace_back(worker);
  }
  for (auto& th : pool) {
    th.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace lrplab
