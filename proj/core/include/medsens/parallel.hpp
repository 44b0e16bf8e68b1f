#pragma once

#include <functional>

namespace medsens {

// Worker-thread budget: hardware concurrency capped by the RMPW_THREADS
// environment variable (values < 1 mean single-threaded).
int thread_budget();

// Runs fn(i) for i in [0, n) across the thread budget with a static block
// partition. fn must only write to per-index slots; exceptions from workers
// are rethrown on the calling thread (first one wins).
void parallel_for(long n, const std::function<void(long)>& fn);

}  // namespace medsens
