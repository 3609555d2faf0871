#pragma once

#include <cstddef>
#include <functional>

namespace handxfer {

// Calls fn(i) for i in [0, n) on up to `jobs` threads. Work items must be
// independent. The exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace handxfer
