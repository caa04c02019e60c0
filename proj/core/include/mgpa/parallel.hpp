#pragma once

#include <cstddef>
#include <functional>

namespace mgpa {

// Worker count used by parallel_for. Defaults to $MGPA_THREADS when set,
// otherwise 1.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for every i in [0, n). Each index is processed by exactly one
// worker and indices never share output, so results do not depend on the
// number of workers. Reductions must be done by the caller in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mgpa
