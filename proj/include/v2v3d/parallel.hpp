#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace v2v3d {

// Work-sharing pool for data-parallel kernels.
//
// Determinism contract: parallel_for splits [0, n) into fixed-size blocks and
// every index is processed by exactly one worker, so kernels that write
// disjoint outputs per index produce bit-identical results for any thread
// count. Reductions must therefore be expressed as one-owner-per-output
// loops, never as shared accumulators. Nested parallel_for calls run inline
// on the calling thread.
class ThreadPool {
public:
    static ThreadPool& instance();

    // n >= 1. Resizing joins existing workers first; cheap when unchanged.
    void set_thread_count(int n);
    int thread_count() const { return requested_; }

    // fn(begin, end) over contiguous blocks covering [0, n).
    void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

    // Convenience wrapper: fn(i) per index.
    template <typename F>
    void parallel_for_each(std::int64_t n, F&& fn) {
        parallel_for(n, [&fn](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) fn(i);
        });
    }

    ~ThreadPool();
    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

private:
    ThreadPool() = default;
    void stop_workers();
    void worker_loop();
    bool run_pending_block();

    struct Job {
        const std::function<void(std::int64_t, std::int64_t)>* fn = nullptr;
        std::int64_t n = 0;
        std::int64_t block = 1;
        std::atomic<std::int64_t> cursor{0};
        std::atomic<std::int64_t> done_blocks{0};
        std::int64_t total_blocks = 0;
    };

    mutable std::mutex mu_;
    std::condition_variable cv_work_;
    std::condition_variable cv_done_;
    std::vector<std::thread> workers_;
    Job* job_ = nullptr;
    std::uint64_t job_epoch_ = 0;
    bool stopping_ = false;
    int requested_ = 1;
};

// Shorthand used by the kernels.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    ThreadPool::instance().parallel_for(n, fn);
}

} // namespace v2v3d
