#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace csim {

// Runs fn(chunk_index, begin, end) over [0, total) split into fixed-size
// chunks. The chunk grid depends only on (total, chunk_size), never on the
// worker count, so per-chunk results merged in chunk order are bitwise
// reproducible for any parallelism width.
template <typename Fn>
void parallel_chunks(std::int64_t total, std::int64_t chunk_size, int width,
                     Fn&& fn) {
  if (total <= 0) return;
  if (chunk_size <= 0) chunk_size = 1;
  const std::int64_t n_chunks = (total + chunk_size - 1) / chunk_size;
  if (width <= 0) {
    width = static_cast<int>(std::thread::hardware_concurrency());
    if (width <= 0) width = 1;
  }
  if (width == 1 || n_chunks == 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      fn(c, c * chunk_size, std::min(total, (c + 1) * chunk_size));
    }
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::int64_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        fn(c, c * chunk_size, std::min(total, (c + 1) * chunk_size));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const int n_threads = static_cast<int>(std::min<std::int64_t>(width, n_chunks));
  threads.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace csim
