#pragma once

#include <cstddef>
#include <functional>

namespace ule {

// Worker count: ULE_THREADS if set (clamped to >= 1), else the hardware
// concurrency. Read once per process unless overridden.
int thread_count();

// Test hook; 0 restores the environment-derived default.
void set_thread_override(int n);

// Runs fn(block_index, begin, end) for every block of `block` consecutive
// indices covering [0, n). Block boundaries depend only on (n, block), never
// on the worker count, and each block must write disjoint state, so results
// are bit-identical for any ULE_THREADS. Reductions are the caller's job:
// combine per-block partials sequentially in block order.
void parallel_blocks(size_t n, size_t block,
                     const std::function<void(size_t, size_t, size_t)>& fn);

}  // namespace ule
