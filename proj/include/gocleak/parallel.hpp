#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gocleak {

inline int default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Calls fn(i) for every i in [0, count) on up to `workers` threads. Work is
// handed out by index, so callers that write results into slot i get the same
// output for any worker count. The first exception is rethrown after all
// threads have joined.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    const std::size_t threads = std::min<std::size_t>(std::max(1, workers), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace gocleak
