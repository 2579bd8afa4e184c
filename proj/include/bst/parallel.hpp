#pragma once

#include <cstddef>
#include <functional>

namespace bst {

/// Worker count for the compute kernels. An explicit override set through
/// set_worker_count() wins; otherwise BST_THREADS is read on every call, and
/// without it the hardware concurrency is used.
std::size_t worker_count();

/// 0 clears the override.
void set_worker_count(std::size_t workers);

/// Splits [0, n) into contiguous chunks, one per worker, and runs
/// fn(begin, end) on each. Every index is handled by exactly one worker, so
/// kernels that write disjoint outputs per index stay deterministic. Runs
/// inline when n * cost_per_item is below a small threshold.
void parallel_for(std::size_t n, std::size_t cost_per_item,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace bst
