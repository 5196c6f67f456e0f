// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dynsplat {

/// Number of worker threads. Controlled by the DYNSPLAT_THREADS environment
/// variable; defaults to the hardware concurrency (capped at 8).
inline int thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("DYNSPLAT_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(hw == 0 ? 1 : (hw > 8 ? 8 : hw));
  }();
  return n;
}

namespace detail {

/// Minimal persistent pool. Work is handed out as an atomic chunk counter so
/// the set of chunks (and therefore every per-chunk result) is independent of
/// how many threads execute them.
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  void run(std::size_t num_chunks, const std::function<void(std::size_t)>& fn) {
    if (num_chunks == 0) return;
    const int workers = thread_count();
    if (workers <= 1 || num_chunks == 1) {
      for (std::size_t c = 0; c < num_chunks; ++c) fn(c);
      return;
    }
    ensure_threads(workers - 1);
    {
      std::unique_lock<std::mutex> lock(mutex_);
      fn_ = &fn;
      next_chunk_.store(0, std::memory_order_relaxed);
      total_chunks_ = num_chunks;
      pending_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    cv_start_.notify_all();
    work();  // caller participates
    std::unique_lock<std::mutex> lock(mutex_);
    cv_done_.wait(lock, [&] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  ThreadPool() = default;
  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void ensure_threads(int n) {
    while (static_cast<int>(threads_.size()) < n) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lock(mutex_);
      cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
      seen = generation_;
      if (stop_) return;
      if (fn_ == nullptr) {  // spawned mid-batch; do not join this batch
        continue;
      }
      lock.unlock();
      work();
      lock.lock();
      if (--pending_ == 0) cv_done_.notify_all();
    }
  }

  void work() {
    const auto* fn = fn_;
    if (!fn) return;
    for (;;) {
      const std::size_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      if (c >= total_chunks_) break;
      (*fn)(c);
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_start_, cv_done_;
  const std::function<void(std::size_t)>* fn_ = nullptr;
  std::atomic<std::size_t> next_chunk_{0};
  std::size_t total_chunks_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace detail

/// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
/// The chunk grid depends only on (n, chunk_size), never on the thread count,
/// so per-chunk partial results combined in chunk order are bit-deterministic
/// under any DYNSPLAT_THREADS setting.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, Fn&& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t num_chunks = (n + chunk_size - 1) / chunk_size;
  std::function<void(std::size_t)> task = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(n, begin + chunk_size);
    fn(c, begin, end);
  };
  detail::ThreadPool::instance().run(num_chunks, task);
}

inline std::size_t num_chunks_for(std::size_t n, std::size_t chunk_size) {
  if (n == 0) return 0;
  if (chunk_size == 0) chunk_size = 1;
  return (n + chunk_size - 1) / chunk_size;
}

}  // namespace dynsplat
