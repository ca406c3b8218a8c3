#pragma once

#include <cstddef>
#include <functional>

namespace higgsbal {

// Worker count for node-parallel loops. Results never depend on it: every
// parallel loop writes disjoint per-index outputs and reductions run serially.
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [0, n), split into contiguous chunks across threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace higgsbal
