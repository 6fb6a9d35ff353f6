#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace lrgas {

/// Process-wide worker count for batch-parallel estimators. Results are
/// bit-identical for any setting: batches own seeded streams and are reduced
/// in index order.
inline int& thread_count() {
    static int n = 1;
    return n;
}

inline void set_thread_count(int n) { thread_count() = n < 1 ? 1 : n; }

template <typename Fn>
inline void parallel_batches(int n_batches, Fn&& fn) {
    int workers = std::min(thread_count(), n_batches);
    if (workers <= 1) {
        for (int b = 0; b < n_batches; ++b) fn(b);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int b = next.fetch_add(1); b < n_batches; b = next.fetch_add(1)) fn(b);
        });
    for (auto& t : pool) t.join();
}

} // namespace lrgas
