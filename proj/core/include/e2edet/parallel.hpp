#pragma once

#include <cstddef>
#include <functional>

namespace e2edet {

/// Worker count: E2EDET_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int thread_count();

/// Runs body(i) for i in [0, n) over up to `threads` workers (0 means thread_count()).
/// Indices are split into contiguous blocks; callers write results into
/// per-index slots so the outcome does not depend on scheduling.
/// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace e2edet
