#pragma once

#include <cstddef>
#include <functional>

namespace iclcp {

/// Number of workers to use when the caller passes 0.
unsigned default_workers();

/// Calls fn(i) for i in [0, count) on up to `workers` threads.
/// Work is split into contiguous index blocks; callers write results into
/// pre-sized slots indexed by i so the outcome does not depend on scheduling.
/// The first exception thrown by any task is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace iclcp
