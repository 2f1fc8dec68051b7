#pragma once

#include <cstddef>
#include <functional>

namespace plsim {

// Worker count resolution: explicit argument > PLSIM_THREADS env var > hardware.
int default_threads();

// Runs fn(i) for i in [0, count). Tasks must write to disjoint slots so results
// are independent of the thread count and of scheduling order. Exceptions thrown
// by tasks are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  int threads = 0);

}  // namespace plsim
