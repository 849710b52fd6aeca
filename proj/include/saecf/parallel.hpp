#ifndef SAECF_PARALLEL_HPP
#define SAECF_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace saecf {

// Runs body(i) for i in [0, n) across num_threads workers (0 = hardware
// concurrency). Indices are handed out in chunks; the first exception thrown
// by any worker is rethrown on the calling thread after all workers finish.
inline void parallel_for(std::size_t n, unsigned num_threads,
                         const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  if (num_threads == 0) num_threads = std::thread::hardware_concurrency();
  if (num_threads == 0) num_threads = 1;
  num_threads = static_cast<unsigned>(
      std::min<std::size_t>(num_threads, n));

  if (num_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  constexpr std::size_t kChunk = 16;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker = [&] {
    try {
      for (;;) {
        const std::size_t begin = next.fetch_add(kChunk);
        if (begin >= n) return;
        const std::size_t end = std::min(begin + kChunk, n);
        for (std::size_t i = begin; i < end; ++i) body(i);
      }
    } catch (...) {
      std::scoped_lock lock(error_mu);
      if (!error) error = std::current_exception();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(num_threads);
  for (unsigned t = 0; t < num_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace saecf

#endif
