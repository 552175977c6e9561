#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace vhj {

/// Runs fn(0..count-1) on up to `jobs` threads and returns the results in
/// index order. The first exception thrown by any job is rethrown after all
/// workers have finished. jobs <= 1 runs sequentially on the calling thread.
template <class R>
std::vector<R> parallel_map(std::size_t count, int jobs, const std::function<R(std::size_t)>& fn) {
    std::vector<R> out(count);
    if (jobs <= 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) out[k] = fn(k);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= count) return;
            try {
                out[k] = fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first) first = std::current_exception();
            }
        }
    };
    const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first) std::rethrow_exception(first);
    return out;
}

}  // namespace vhj
