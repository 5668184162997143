#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace deltacert {

/// Splits [0, count) into `jobs` contiguous chunks and runs
/// fn(chunk_index, begin, end) on each. Chunk boundaries depend only on
/// count and jobs, so per-chunk reductions combined in chunk order are
/// deterministic. The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs <= 1) {
    fn(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t chunk = (count + jobs - 1) / jobs;
  for (std::size_t c = 0; c < jobs; ++c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, c, begin, end] {
      try {
        fn(c, begin, end);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::size_t chunk_count(std::size_t count, std::size_t jobs) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (count == 0) return 1;
  const std::size_t chunk = (count + jobs - 1) / jobs;
  return (count + chunk - 1) / chunk;
}

}  // namespace deltacert
