#pragma once

#include <cstddef>
#include <functional>

namespace clab {

// Worker count from CLAB_THREADS (default: hardware concurrency, min 1).
std::size_t worker_count();

// Runs body(i) for i in [0, n) across worker_count() threads. Each index is
// visited exactly once; callers write results into preallocated slots so
// output order never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace clab
