#pragma once

// Deterministic fork-join helper. Work items write only to their own output
// slots and all cross-item reductions happen serially afterwards, so results
// are bit-identical for any worker count. The FELB_THREADS environment
// variable caps the worker count when no explicit count is configured.

#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace felb {

/// Worker count to use: `configured` if positive, else FELB_THREADS from the
/// environment, else 1.
inline unsigned resolve_threads(unsigned configured = 0) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("FELB_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) return static_cast<unsigned>(parsed);
  }
  return 1;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers (contiguous
/// static blocks). The first exception thrown by any item is rethrown on the
/// calling thread after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (count == 0) return;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(threads, 1u), count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = count * w / workers;
    const std::size_t end = count * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace felb
