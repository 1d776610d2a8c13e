#include "v2v3d/parallel.hpp"

#include <algorithm>

namespace v2v3d {

namespace {
// Set while a thread executes a block; nested parallel_for calls from inside
// a block run inline so the active job is never displaced.
thread_local bool tl_in_block = false;

struct BlockScope {
    BlockScope() { tl_in_block = true; }
    ~BlockScope() { tl_in_block = false; }
};
} // namespace

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool;
    return pool;
}

ThreadPool::~ThreadPool() { stop_workers(); }

void ThreadPool::stop_workers() {
    {
        std::lock_guard<std::mutex> lk(mu_);
        stopping_ = true;
    }
    cv_work_.notify_all();
    for (auto& w : workers_) w.join();
    workers_.clear();
    stopping_ = false;
}

void ThreadPool::set_thread_count(int n) {
    n = std::max(1, n);
    if (n == requested_) return;
    stop_workers();
    requested_ = n;
    for (int i = 0; i < n - 1; ++i) {
        workers_.emplace_back([this] { worker_loop(); });
    }
}

bool ThreadPool::run_pending_block() {
    Job* job = job_;
    if (!job) return false;
    const std::int64_t begin = job->cursor.fetch_add(job->block, std::memory_order_relaxed);
    if (begin >= job->n) return false;
    const std::int64_t end = std::min<std::int64_t>(begin + job->block, job->n);
    {
        BlockScope scope;
        (*job->fn)(begin, end);
    }
    if (job->done_blocks.fetch_add(1, std::memory_order_acq_rel) + 1 == job->total_blocks) {
        std::lock_guard<std::mutex> lk(mu_);
        cv_done_.notify_all();
    }
    return true;
}

void ThreadPool::worker_loop() {
    std::uint64_t seen_epoch = 0;
    for (;;) {
        {
            std::unique_lock<std::mutex> lk(mu_);
            cv_work_.wait(lk, [&] { return stopping_ || (job_ != nullptr && job_epoch_ != seen_epoch); });
            if (stopping_) return;
            seen_epoch = job_epoch_;
        }
        while (run_pending_block()) {
        }
    }
}

void ThreadPool::parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (tl_in_block || workers_.empty() || n == 1) {
        fn(0, n);
        return;
    }
    // Blocks are a few per worker for load balance; block boundaries depend
    // only on n and the block size, not on scheduling.
    const int nthreads = requested_;
    std::int64_t block = std::max<std::int64_t>(1, n / (static_cast<std::int64_t>(nthreads) * 4));
    Job job;
    job.fn = &fn;
    job.n = n;
    job.block = block;
    job.total_blocks = (n + block - 1) / block;
    {
        std::lock_guard<std::mutex> lk(mu_);
        job_ = &job;
        ++job_epoch_;
    }
    cv_work_.notify_all();
    while (run_pending_block()) {
    }
    {
        std::unique_lock<std::mutex> lk(mu_);
        cv_done_.wait(lk, [&] { return job.done_blocks.load(std::memory_order_acquire) == job.total_blocks; });
        job_ = nullptr;
    }
}

} // namespace v2v3d
