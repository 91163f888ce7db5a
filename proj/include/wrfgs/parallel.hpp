// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace wrfgs {

// Fixed-size worker pool driven from a single orchestrating thread. Work is
// split into chunks whose identity depends only on (n_items, n_threads);
// chunk claims are generation-tagged, so a worker that wakes late can never
// touch a previous call's job. Reductions must accumulate into per-chunk
// buffers and merge in chunk order; under that rule results are
// bit-reproducible for a fixed thread count regardless of scheduling.
class ThreadPool {
public:
    explicit ThreadPool(int n_threads) { start(n_threads); }
    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;
    ~ThreadPool() { stop(); }

    int size() const { return int(workers_.size()) + 1; }  // workers + calling thread

    void resize(int n_threads) {
        stop();
        start(n_threads);
    }

    // Runs fn(chunk_id) for chunk_id in [0, n_chunks). The calling thread
    // participates. Blocks until all chunks are done; the first exception
    // thrown by any chunk is rethrown here.
    void run_chunks(int n_chunks, const std::function<void(int)>& fn) {
        if (n_chunks <= 0) return;
        if (workers_.empty() || n_chunks == 1) {
            for (int c = 0; c < n_chunks; ++c) fn(c);
            return;
        }
        uint64_t gen;
        {
            std::lock_guard<std::mutex> lk(m_);
            job_ = &fn;
            n_chunks_ = n_chunks;
            next_chunk_ = 0;
            pending_ = n_chunks;
            error_ = nullptr;
            gen = ++generation_;
        }
        cv_.notify_all();
        work_cycle(gen);
        std::exception_ptr err;
        {
            std::unique_lock<std::mutex> lk(m_);
            done_cv_.wait(lk, [&] { return pending_ == 0; });
            job_ = nullptr;
            err = error_;
            error_ = nullptr;
        }
        if (err) std::rethrow_exception(err);
    }

    // Splits [0, n) into roughly n_threads chunks and runs fn(chunk_id, lo, hi).
    void parallel_ranges(int64_t n, const std::function<void(int, int64_t, int64_t)>& fn) {
        if (n <= 0) return;
        int nc = size();
        if (n < nc) nc = int(n);
        int64_t chunk = (n + nc - 1) / nc;
        run_chunks(nc, [&](int c) {
            int64_t lo = c * chunk;
            int64_t hi = lo + chunk < n ? lo + chunk : n;
            if (lo < hi) fn(c, lo, hi);
        });
    }

    // Element-wise parallel map over [0, n).
    void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
        parallel_ranges(n, [&](int, int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) fn(i);
        });
    }

private:
    void start(int n_threads) {
        if (n_threads < 1) n_threads = 1;
        stopping_ = false;
        for (int i = 0; i + 1 < n_threads; ++i)
            workers_.emplace_back([this] { worker_main(); });
    }

    void stop() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
        workers_.clear();
    }

    void worker_main() {
        uint64_t seen = 0;
        for (;;) {
            uint64_t gen;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [&] { return stopping_ || generation_ != seen; });
                if (stopping_) return;
                gen = seen = generation_;
            }
            work_cycle(gen);
        }
    }

    // Claims and runs chunks belonging to generation `gen` only.
    void work_cycle(uint64_t gen) {
        for (;;) {
            const std::function<void(int)>* job;
            int c;
            {
                std::lock_guard<std::mutex> lk(m_);
                if (generation_ != gen || next_chunk_ >= n_chunks_ || !job_) return;
                c = next_chunk_++;
                job = job_;
            }
            std::exception_ptr err;
            try {
                (*job)(c);
            } catch (...) {
                err = std::current_exception();
            }
            {
                std::lock_guard<std::mutex> lk(m_);
                if (generation_ == gen) {
                    if (err && !error_) error_ = err;
                    if (--pending_ == 0) done_cv_.notify_all();
                }
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex m_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(int)>* job_ = nullptr;
    int next_chunk_ = 0;
    int n_chunks_ = 0;
    int pending_ = 0;
    uint64_t generation_ = 0;
    bool stopping_ = false;
    std::exception_ptr error_;
};

}  // namespace wrfgs
