#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace eqcomm {

/// Worker count: EQCOMM_THREADS if set and positive, else hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("EQCOMM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, count) into contiguous chunks, one per worker, and calls
/// body(chunk_index, begin, end). Chunk boundaries depend only on count and
/// the returned chunk count, so callers that reduce per-chunk results in
/// chunk order get results independent of scheduling.
template <typename Body>
std::size_t parallel_chunks(std::uint64_t count, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(worker_count(), std::max<std::uint64_t>(count, 1)));
  const std::uint64_t step = (count + workers - 1) / workers;
  if (workers <= 1) {
    body(std::size_t{0}, std::uint64_t{0}, count);
    return 1;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t begin = std::min<std::uint64_t>(count, w * step);
    const std::uint64_t end = std::min<std::uint64_t>(count, begin + step);
    threads.emplace_back([&, w, begin, end] {
      try {
        body(std::size_t{w}, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return workers;
}

/// Upper bound on the number of chunks parallel_chunks will use.
inline std::size_t max_chunks() { return worker_count(); }

}  // namespace eqcomm
