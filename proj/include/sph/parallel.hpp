#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sph {

/// Worker count used by every data-parallel phase. Defaults to 1.
void set_worker_count(int workers);
int worker_count();

/// Calls body(i) for i in [0, n), statically partitioned over the workers.
/// Each index is visited exactly once; writes must stay index-local.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (worker_count() > 1)
    for (long long i = 0; i < count; ++i) {
        body(static_cast<std::size_t>(i));
    }
}

/// Fixed-shape pairwise summation. The result depends only on the input
/// order, never on the worker count.
double pairwise_sum(std::span<const double> values);

} // namespace sph
