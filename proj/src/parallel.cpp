#include "sph/parallel.hpp"

#include <algorithm>

namespace sph {

namespace {
int g_workers = 1;
}

void set_worker_count(int workers) { g_workers = std::max(1, workers); }

int worker_count() { return g_workers; }

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 64;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace sph
