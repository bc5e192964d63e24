#pragma once

#include <cstddef>
#include <functional>

namespace distinct {

/// Worker count: DISTINCT_THREADS if set, else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Each index must write only its own outputs;
/// callers reduce results in index order afterwards, so output does not depend
/// on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace distinct
