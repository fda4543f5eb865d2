#include "ule/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ule {

namespace {
std::atomic<int> g_override{0};

int env_thread_count() {
  if (const char* s = std::getenv("ULE_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}
}  // namespace

int thread_count() {
  const int o = g_override.load(std::memory_order_relaxed);
  if (o >= 1) return o;
  static const int n = env_thread_count();
  return n;
}

void set_thread_override(int n) { g_override.store(n, std::memory_order_relaxed); }

void parallel_blocks(size_t n, size_t block,
                     const std::function<void(size_t, size_t, size_t)>& fn) {
  if (n == 0) return;
  if (block == 0) block = 1;
  const size_t nblocks = (n + block - 1) / block;
  const size_t workers =
      std::min<size_t>(static_cast<size_t>(thread_count()), nblocks);

  if (workers <= 1) {
    for (size_t b = 0; b < nblocks; ++b)
      fn(b, b * block, std::min(n, (b + 1) * block));
    return;
  }

  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto run = [&] {
    for (;;) {
      const size_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= nblocks) return;
      try {
        fn(b, b * block, std::min(n, (b + 1) * block));
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (size_t i = 1; i < workers; ++i) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace ule
