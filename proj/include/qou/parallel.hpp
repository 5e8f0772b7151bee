#pragma once

// Static work splitting over std::thread.  Work items are indices; each item
// writes only its own output slot, so results never depend on the schedule.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace qou {

/// Default worker count: QOU_THREADS if set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
inline int default_threads() {
    if (const char* env = std::getenv("QOU_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(i) for every i in [0, count) using up to `threads` workers.
/// Items are dealt out in contiguous blocks.  If items fail, the exception of
/// the lowest failing index is rethrown after all workers have joined.
template <class Body>
void parallel_for(std::int64_t count, int threads, Body&& body) {
    if (count <= 0) return;
    const std::int64_t workers = std::clamp<std::int64_t>(threads, 1, count);
    if (workers == 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::int64_t failed_index = count;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w) {
        const std::int64_t begin = count * w / workers;
        const std::int64_t end = count * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            std::int64_t i = begin;
            try {
                for (; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace qou
