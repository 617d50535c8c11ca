#pragma once

#include <cstdint>
#include <functional>

namespace uqseg {

// Worker cap for parallel_for: min(hardware_concurrency, VALUES_THREADS).
// VALUES_THREADS=1 forces serial execution.
int max_threads();

// Static-partition parallel loop over [0, n). fn must only write state owned
// by its own index; partitioning is deterministic, so outputs stored per
// index are identical to a serial run.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace uqseg
