#include "corseg/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace corseg {

namespace {
int g_threads = 0;

int resolve_threads() {
    if (g_threads > 0) return g_threads;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(std::min(hw, 16u));
}
} // namespace

void set_thread_count(int n) { g_threads = n < 0 ? 0 : n; }

int thread_count() { return resolve_threads(); }

void parallel_ranges(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    int workers = resolve_threads();
    if (workers <= 1 || n < 1024) {
        fn(0, n);
        return;
    }
    workers = static_cast<int>(std::min<std::int64_t>(workers, n));
    std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        std::int64_t begin = w * chunk;
        std::int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    parallel_ranges(n, [&fn](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
    });
}

void parallel_for_coarse(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    int workers = static_cast<int>(std::min<std::int64_t>(resolve_threads(), n));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        std::int64_t begin = w * chunk;
        std::int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] {
            for (std::int64_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace corseg
