#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sonic {

// Resolve a thread-count request: <= 0 means "use all cores". The
// SONIC_THREADS environment variable, when set, overrides the request.
inline int resolve_threads(int requested) {
  if (const char* env = std::getenv("SONIC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) requested = v;
  }
  if (requested <= 0) {
    const unsigned hc = std::thread::hardware_concurrency();
    requested = hc > 0 ? static_cast<int>(hc) : 1;
  }
  return requested;
}

// Run f(i) for i in [0, n). Each task must write only to its own output slot,
// which makes results independent of the number of workers and of scheduling.
// The first exception thrown by any task is rethrown on the calling thread.
template <class F>
void parallel_for(int n, int threads, F&& f) {
  if (n <= 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n || failed.load()) break;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sonic
