#include "vptrap/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vptrap {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int threads) { g_threads = std::max(1, threads); }
int num_threads() { return g_threads; }

void parallel_chunks(std::size_t count, int chunks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn) {
    chunks = std::max(1, chunks);
    auto bounds = [&](int c) { return count * static_cast<std::size_t>(c) / static_cast<std::size_t>(chunks); };
    const int threads = std::min(num_threads(), chunks);
    if (threads <= 1) {
        for (int c = 0; c < chunks; ++c) fn(c, bounds(c), bounds(c + 1));
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            try {
                for (int c = next++; c < chunks; c = next++) fn(c, bounds(c), bounds(c + 1));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = chunks;
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    parallel_chunks(count, num_threads(), [&](int, std::size_t lo, std::size_t hi) { fn(lo, hi); });
}

}  // namespace vptrap
