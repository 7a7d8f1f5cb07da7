#pragma once

#include <cstddef>
#include <functional>

namespace bof {

// Worker cap from BOF_THREADS, defaulting to the hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) across worker threads with contiguous static
// chunks. Callers own any ordering of result reduction.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bof
