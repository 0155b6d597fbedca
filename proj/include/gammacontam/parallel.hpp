#pragma once

#include <cstddef>
#include <functional>

namespace gammacontam {

/// Worker count: GAMMA_CONTAM_THREADS if set and positive, otherwise the
/// hardware concurrency (at least 1).
std::size_t default_thread_count();

/// Calls fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace gammacontam
