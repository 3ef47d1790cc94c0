#pragma once

#include <cstddef>
#include <functional>

namespace specmp {

/// Worker count: SPECMP_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
[[nodiscard]] int worker_count();

/**
 * Runs body(i) for i in [0, n) on up to worker_count() threads using static
 * contiguous chunks. Bodies must write only to index-owned outputs, which
 * keeps results independent of the thread count. The exception thrown for
 * the smallest index is rethrown.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace specmp
