#pragma once

#include <functional>

namespace skelgrow {

// Worker count: hardware concurrency, capped by the SKELGROW_THREADS
// environment variable when set. Read once per process.
int worker_count();

// Splits [0, n) into contiguous chunks, one per worker, and runs
// fn(begin, end) on each. Chunks are disjoint, so parallel bodies that
// only write their own index range produce output independent of the
// worker count. Falls back to a direct call when n is small.
void parallel_for(int n, const std::function<void(int, int)>& fn);

}  // namespace skelgrow
