#pragma once

#include <cstdint>
#include <functional>

namespace ifgan {

// Worker count: min(hardware_concurrency, IFGAN_THREADS) with a floor of 1.
int worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
// worker, so writes partitioned by index are race-free and results do not
// depend on the worker count. Falls back to a plain loop when only one
// worker is available or n is small.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace ifgan
