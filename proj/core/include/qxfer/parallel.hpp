#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qxfer {

// Runs body(index, worker) for every index in [0, n) across `workers`
// threads, handing out fixed-size chunks from an atomic counter. Results must
// be written to per-index slots or per-worker accumulators; with
// order-independent merges downstream this yields bit-identical output for
// any worker count. The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_for_indexed(std::int64_t n, int workers, Body&& body,
                          std::int64_t chunk = 64) {
    if (workers < 1) workers = 1;
    if (n <= 0) return;
    if (workers == 1) {
        for (std::int64_t i = 0; i < n; ++i) {
            body(i, 0);
        }
        return;
    }

    std::atomic<std::int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto run = [&](int worker) {
        try {
            for (;;) {
                const std::int64_t begin = next.fetch_add(chunk, std::memory_order_relaxed);
                if (begin >= n) return;
                const std::int64_t end = std::min(begin + chunk, n);
                for (std::int64_t i = begin; i < end; ++i) {
                    body(i, worker);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back(run, w);
    }
    for (std::thread& th : pool) {
        th.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace qxfer
