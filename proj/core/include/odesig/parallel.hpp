#pragma once

#include <functional>

namespace odesig {

// Effective worker count: `requested` if positive, else the ODESIG_THREADS
// environment variable, else hardware concurrency.
int resolve_threads(int requested);

// Runs fn(0..n-1) across up to `threads` workers. Index assignment is static,
// so any per-index outputs can be reduced in index order afterwards; results
// must not depend on the worker count. The first exception thrown by a worker
// is rethrown on the calling thread.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

} // namespace odesig
