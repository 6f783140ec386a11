#pragma once

#include <cstddef>
#include <functional>

namespace crackmc {

/// Runs fn(i) for every i in [0, n) on `threads` workers (0 picks the
/// hardware count).  Work is handed out through a shared counter; the first
/// exception a worker raises is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

/// Worker count actually used for a requested value.
int resolve_threads(int threads);

}  // namespace crackmc
