#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace hfrac {

/// Minimal persistent worker pool. Work is split into chunks whose boundaries
/// depend only on the problem size, partial results are combined in fixed
/// chunk order, so results are bit-identical for any worker count.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    static void set_max_threads(int t) { instance().max_threads_ = t < 1 ? 1 : t; }
    static int max_threads() { return instance().max_threads_; }

    /// Runs job(0..njobs-1) across the workers; the caller participates.
    /// Re-entrant calls from inside a worker run inline.
    void run(std::int64_t njobs, const std::function<void(std::int64_t)>& job) {
        if (njobs <= 0) return;
        const int want = static_cast<int>(std::min<std::int64_t>(max_threads_, njobs));
        if (want <= 1 || in_worker()) {
            for (std::int64_t i = 0; i < njobs; ++i) job(i);
            return;
        }
        ensure_workers(want - 1);
        auto task = std::make_shared<Task>();
        task->job = &job;
        task->total = njobs;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            current_ = task;
        }
        wake_.notify_all();
        execute(*task);
        std::unique_lock<std::mutex> lock(task->m);
        task->done.wait(lock, [&] { return task->completed == task->total; });
        std::lock_guard<std::mutex> pool_lock(mutex_);
        if (current_ == task) current_.reset();
    }

private:
    struct Task {
        const std::function<void(std::int64_t)>* job = nullptr;
        std::int64_t total = 0;
        std::atomic<std::int64_t> next{0};
        std::mutex m;
        std::condition_variable done;
        std::int64_t completed = 0;
    };

    ThreadPool() {
        const unsigned hw = std::thread::hardware_concurrency();
        max_threads_ = hw == 0 ? 1 : static_cast<int>(hw);
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        wake_.notify_all();
        for (auto& t : workers_) t.join();
    }

    static bool& in_worker() {
        thread_local bool flag = false;
        return flag;
    }

    void ensure_workers(int count) {
        std::lock_guard<std::mutex> lock(spawn_mutex_);
        while (static_cast<int>(workers_.size()) < count)
            workers_.emplace_back([this] { worker_loop(); });
    }

    void worker_loop() {
        in_worker() = true;
        std::shared_ptr<Task> last;
        for (;;) {
            std::shared_ptr<Task> task;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                wake_.wait(lock, [&] { return stop_ || (current_ && current_ != last); });
                if (stop_) return;
                task = current_;
            }
            last = task;
            if (task) execute(*task);
        }
    }

    static void execute(Task& task) {
        std::int64_t mine = 0;
        for (;;) {
            const std::int64_t i = task.next.fetch_add(1, std::memory_order_relaxed);
            if (i >= task.total) break;
            (*task.job)(i);
            ++mine;
        }
        if (mine > 0) {
            std::lock_guard<std::mutex> lock(task.m);
            task.completed += mine;
            if (task.completed == task.total) task.done.notify_all();
        }
    }

    int max_threads_ = 1;
    std::mutex mutex_, spawn_mutex_;
    std::condition_variable wake_;
    std::vector<std::thread> workers_;
    std::shared_ptr<Task> current_;
    bool stop_ = false;
};

/// Deterministic parallel reduction: [0, count) is cut into at most 256 chunks
/// (boundaries depend on count only), chunk_sum(begin, end) produces each
/// partial, partials are added in chunk order.
template <class ChunkSum>
double chunked_sum(std::int64_t count, const ChunkSum& chunk_sum) {
    if (count <= 0) return 0.0;
    const std::int64_t chunk = std::max<std::int64_t>(1, (count + 255) / 256);
    const std::int64_t nchunks = (count + chunk - 1) / chunk;
    std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
    ThreadPool::instance().run(nchunks, [&](std::int64_t k) {
        const std::int64_t b = k * chunk;
        const std::int64_t e = std::min(count, b + chunk);
        partial[static_cast<std::size_t>(k)] = chunk_sum(b, e);
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

/// Parallel loop with independent per-index side effects.
template <class Body>
void parallel_for(std::int64_t count, const Body& body) {
    if (count <= 0) return;
    const std::int64_t chunk = std::max<std::int64_t>(1, (count + 255) / 256);
    const std::int64_t nchunks = (count + chunk - 1) / chunk;
    ThreadPool::instance().run(nchunks, [&](std::int64_t k) {
        const std::int64_t b = k * chunk;
        const std::int64_t e = std::min(count, b + chunk);
        for (std::int64_t i = b; i < e; ++i) body(i);
    });
}

} // namespace hfrac
