#include "ifgan/threadpool.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ifgan {

int worker_count() {
    static const int cached = [] {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        if (const char* env = std::getenv("IFGAN_THREADS")) {
            const int cap = std::atoi(env);
            if (cap >= 1) n = std::min(n, cap);
        }
        return std::min(n, 16);
    }();
    return cached;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    const int workers = worker_count();
    if (workers <= 1 || n < 4) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int used = static_cast<int>(std::min<std::int64_t>(workers, n));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(used));
    for (int t = 0; t < used; ++t) {
        const std::int64_t lo = n * t / used;
        const std::int64_t hi = n * (t + 1) / used;
        threads.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : threads) th.join();
}

}  // namespace ifgan
