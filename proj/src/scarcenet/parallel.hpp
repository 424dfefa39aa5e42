#pragma once

#include <cstddef>
#include <functional>

namespace scarcenet {

/// Worker count for per-sample loops. 0 selects hardware concurrency. Results
/// never depend on this value: work items are independent and every
/// reduction happens afterwards in index order.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, n). The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace scarcenet
