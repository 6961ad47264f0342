#pragma once

#include <functional>

namespace uqsim {

// Runs fn(0..count-1) across up to `workers` threads pulling from a shared
// counter. Tasks must be independent; any escaped exception is rethrown on
// the calling thread after all workers finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace uqsim
