#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace relval {

/// Runs fn(begin, end) over a fixed contiguous partition of [0, total).
/// Chunk boundaries depend only on `total`, never on `threads`, and chunks
/// write disjoint outputs, so results are independent of the thread count.
/// With one thread (or one item) everything runs inline on the caller.
template <typename Fn>
void parallel_for(std::size_t total, std::size_t threads, Fn&& fn) {
    if (total == 0) return;
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, total));
    if (workers == 1) {
        fn(std::size_t{0}, total);
        return;
    }

    const std::size_t base = total / workers;
    const std::size_t extra = total % workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t size = base + (w < extra ? 1 : 0);
        const std::size_t end = begin + size;
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& worker : pool) worker.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace relval
