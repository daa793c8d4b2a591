#include "sph/octree.hpp"

#include "sph/parallel.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace sph {

double Box::diagonal() const {
    const double dx = hi[0] - lo[0];
    const double dy = hi[1] - lo[1];
    const double dz = hi[2] - lo[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Box empty_box() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {{inf, inf, inf}, {-inf, -inf, -inf}};
}

Box merge(const Box& a, const Box& b) {
    Box r;
    for (int k = 0; k < 3; ++k) {
        r.lo[k] = std::min(a.lo[k], b.lo[k]);
        r.hi[k] = std::max(a.hi[k], b.hi[k]);
    }
    return r;
}

Box raw_bounds(std::span<const double> x, std::span<const double> y, std::span<const double> z) {
    Box b = empty_box();
    for (std::size_t i = 0; i < x.size(); ++i) {
        b.lo[0] = std::min(b.lo[0], x[i]);
        b.hi[0] = std::max(b.hi[0], x[i]);
        b.lo[1] = std::min(b.lo[1], y[i]);
        b.hi[1] = std::max(b.hi[1], y[i]);
        b.lo[2] = std::min(b.lo[2], z[i]);
        b.hi[2] = std::max(b.hi[2], z[i]);
    }
    return b;
}

Box inflate(const Box& raw, double slack, const PeriodicZ& periodic) {
    Box b = raw;
    double largest = 0.0;
    for (int k = 0; k < 3; ++k) largest = std::max(largest, raw.hi[k] - raw.lo[k]);
    for (int k = 0; k < 3; ++k) {
        const double extent = raw.hi[k] - raw.lo[k];
        double pad = slack * extent;
        if (pad <= 0.0) pad = slack * (largest > 0.0 ? largest : 1.0);
        b.lo[k] -= pad;
        b.hi[k] += pad;
    }
    if (periodic.enabled) {
        b.lo[2] = periodic.lo;
        b.hi[2] = periodic.hi;
    }
    return b;
}

Box compute_bbox(const ParticleSystem& ps, double slack, const PeriodicZ& periodic) {
    if (ps.size() == 0) throw ConfigError("compute_bbox: empty particle system");
    return inflate(raw_bounds(ps.x, ps.y, ps.z), slack, periodic);
}

namespace {

int octant(const Box& box, double x, double y, double z) {
    const Vec3 c = box.center();
    return (x >= c[0] ? 1 : 0) | (y >= c[1] ? 2 : 0) | (z >= c[2] ? 4 : 0);
}

Box child_box(const Box& box, int oct) {
    const Vec3 c = box.center();
    Box b;
    for (int k = 0; k < 3; ++k) {
        const bool upper = (oct >> k) & 1;
        b.lo[k] = upper ? c[k] : box.lo[k];
        b.hi[k] = upper ? box.hi[k] : c[k];
    }
    return b;
}

double interval_distance(double p, double lo, double hi) {
    if (p < lo) return lo - p;
    if (p > hi) return p - hi;
    return 0.0;
}

} // namespace

Octree Octree::build(std::span<const double> x, std::span<const double> y,
                     std::span<const double> z, std::span<const double> h, const Box& box,
                     const Options& options) {
    if (options.bucket_size == 0) throw ConfigError("octree: bucket size must be positive");
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!box.contains(x[i], y[i], z[i])) {
            throw ConfigError("octree: particle " + std::to_string(i) + " at (" +
                              std::to_string(x[i]) + ", " + std::to_string(y[i]) + ", " +
                              std::to_string(z[i]) + ") lies outside the domain box");
        }
    }

    Octree tree;
    tree.options_ = options;
    tree.order_.resize(n);
    std::iota(tree.order_.begin(), tree.order_.end(), std::size_t{0});
    OctreeNode root;
    root.box = box;
    root.begin = 0;
    root.end = n;
    tree.nodes_.push_back(root);

    std::vector<std::size_t> scratch(n);
    tree.split(x, y, z, 0, scratch);
    tree.finalize(h);
    return tree;
}

void Octree::split(std::span<const double> x, std::span<const double> y,
                   std::span<const double> z, int node_index, std::vector<std::size_t>& scratch) {
    const OctreeNode node = nodes_[node_index];
    if (node.count() <= options_.bucket_size || node.depth >= options_.max_depth) return;

    std::array<std::size_t, 9> offsets{};
    for (std::size_t k = node.begin; k < node.end; ++k) {
        const std::size_t i = order_[k];
        ++offsets[octant(node.box, x[i], y[i], z[i]) + 1];
    }
    for (int c = 0; c < 8; ++c) offsets[c + 1] += offsets[c];
    std::array<std::size_t, 8> cursor{};
    for (int c = 0; c < 8; ++c) cursor[c] = node.begin + offsets[c];
    for (std::size_t k = node.begin; k < node.end; ++k) {
        const std::size_t i = order_[k];
        scratch[cursor[octant(node.box, x[i], y[i], z[i])]++] = i;
    }
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(node.begin),
              scratch.begin() + static_cast<std::ptrdiff_t>(node.end),
              order_.begin() + static_cast<std::ptrdiff_t>(node.begin));

    const int first = static_cast<int>(nodes_.size());
    nodes_[node_index].first_child = first;
    for (int c = 0; c < 8; ++c) {
        OctreeNode child;
        child.box = child_box(node.box, c);
        child.begin = node.begin + offsets[c];
        child.end = node.begin + offsets[c + 1];
        child.depth = node.depth + 1;
        nodes_.push_back(child);
    }
    for (int c = 0; c < 8; ++c) split(x, y, z, first + c, scratch);
}

void Octree::finalize(std::span<const double> h) {
    leaves_.clear();
    // Depth-first walk: leaves come out in order() sequence.
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        if (nodes_[k].leaf()) {
            leaves_.push_back(k);
        } else {
            for (int c = 7; c >= 0; --c) stack.push_back(nodes_[k].first_child + c);
        }
    }
    leaf_position_.assign(nodes_.size(), -1);
    for (std::size_t l = 0; l < leaves_.size(); ++l) leaf_position_[leaves_[l]] = static_cast<int>(l);
    if (h.empty()) return;
    // Children always sit after their parent, so a reverse sweep is bottom-up.
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        OctreeNode& node = *it;
        double hm = 0.0;
        if (node.leaf()) {
            for (std::size_t k = node.begin; k < node.end; ++k) hm = std::max(hm, h[order_[k]]);
        } else {
            for (int c = 0; c < 8; ++c) hm = std::max(hm, nodes_[node.first_child + c].h_max);
        }
        node.h_max = hm;
    }
}

bool Octree::refresh(std::span<const double> x, std::span<const double> y,
                     std::span<const double> z, std::span<const double> h) {
    const std::size_t n = x.size();
    std::vector<int> bin(n);
    std::vector<std::size_t> counts(leaves_.size() + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!box().contains(x[i], y[i], z[i])) return false;
        int k = 0;
        while (!nodes_[k].leaf()) k = nodes_[k].first_child + octant(nodes_[k].box, x[i], y[i], z[i]);
        bin[i] = leaf_position_[k];
        ++counts[bin[i] + 1];
    }
    for (std::size_t l = 0; l < leaves_.size(); ++l) counts[l + 1] += counts[l];
    order_.resize(n);
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < n; ++i) order_[cursor[bin[i]]++] = i;

    for (std::size_t l = 0; l < leaves_.size(); ++l) {
        nodes_[leaves_[l]].begin = counts[l];
        nodes_[leaves_[l]].end = counts[l + 1];
    }
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->leaf()) continue;
        it->begin = nodes_[it->first_child].begin;
        it->end = nodes_[it->first_child + 7].end;
    }
    finalize(h);
    return !needs_rebuild();
}

bool Octree::needs_rebuild() const {
    const std::size_t bucket = options_.bucket_size;
    for (const auto& node : nodes_) {
        if (node.leaf()) {
            if (node.count() > 2 * bucket && node.depth < options_.max_depth) return true;
        } else if (2 * node.count() < bucket) {
            return true;
        }
    }
    return false;
}

std::vector<int> Octree::leaf_of_particles() const {
    std::vector<int> result(order_.size(), -1);
    for (std::size_t l = 0; l < leaves_.size(); ++l) {
        const OctreeNode& node = nodes_[leaves_[l]];
        for (std::size_t k = node.begin; k < node.end; ++k) result[order_[k]] = static_cast<int>(l);
    }
    return result;
}

int Octree::locate(double x, double y, double z) const {
    if (!box().contains(x, y, z)) return -1;
    int k = 0;
    while (!nodes_[k].leaf()) k = nodes_[k].first_child + octant(nodes_[k].box, x, y, z);
    return leaf_position_[k];
}

double Octree::box_distance2(const Box& b, double x, double y, double z) const {
    const double dx = interval_distance(x, b.lo[0], b.hi[0]);
    const double dy = interval_distance(y, b.lo[1], b.hi[1]);
    double dz = interval_distance(z, b.lo[2], b.hi[2]);
    if (options_.periodic.enabled && dz > 0.0) {
        const double p = options_.periodic.period();
        dz = std::min({dz, interval_distance(z + p, b.lo[2], b.hi[2]),
                       interval_distance(z - p, b.lo[2], b.hi[2])});
    }
    return dx * dx + dy * dy + dz * dz;
}

double Octree::box_box_distance2(const Box& a, const Box& b) const {
    auto gap = [](double alo, double ahi, double blo, double bhi) {
        return std::max({0.0, blo - ahi, alo - bhi});
    };
    const double dx = gap(a.lo[0], a.hi[0], b.lo[0], b.hi[0]);
    const double dy = gap(a.lo[1], a.hi[1], b.lo[1], b.hi[1]);
    double dz = gap(a.lo[2], a.hi[2], b.lo[2], b.hi[2]);
    if (options_.periodic.enabled && dz > 0.0) {
        const double p = options_.periodic.period();
        dz = std::min({dz, gap(a.lo[2] + p, a.hi[2] + p, b.lo[2], b.hi[2]),
                       gap(a.lo[2] - p, a.hi[2] - p, b.lo[2], b.hi[2])});
    }
    return dx * dx + dy * dy + dz * dz;
}

bool Octree::any_reaches(std::span<const double> x, std::span<const double> y,
                         std::span<const double> z, std::span<const double> h, double px,
                         double py, double pz) const {
    int stack[8 * 64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const OctreeNode& node = nodes_[stack[--top]];
        if (node.count() == 0) continue;
        const double reach = 2.0 * node.h_max;
        if (box_distance2(node.box, px, py, pz) > reach * reach * (1.0 + 1e-10)) continue;
        if (!node.leaf()) {
            for (int c = 7; c >= 0; --c) stack[top++] = node.first_child + c;
            continue;
        }
        for (std::size_t k = node.begin; k < node.end; ++k) {
            const std::size_t j = order_[k];
            const double dx = x[j] - px;
            const double dy = y[j] - py;
            const double dz = options_.periodic.min_image(z[j] - pz);
            const double r = 2.0 * h[j];
            if (dx * dx + dy * dy + dz * dz < r * r) return true;
        }
    }
    return false;
}

void find_neighbors(const Octree& tree, ParticleSystem& ps, std::size_t query_count,
                    std::size_t capacity) {
    ps.neighbors.reset(ps.size(), capacity);
    std::vector<std::uint8_t> cut(query_count, 0);
    const auto& id = ps.id;
    parallel_for(query_count, [&](std::size_t i) {
        thread_local std::vector<int> found;
        found.clear();
        tree.for_each_within(ps.x, ps.y, ps.z, ps.x[i], ps.y[i], ps.z[i], 2.0 * ps.h[i],
                             [&](std::size_t j) {
                                 if (j != i) found.push_back(static_cast<int>(j));
                             });
        std::sort(found.begin(), found.end(), [&](int a, int b) { return id[a] < id[b]; });
        const std::size_t kept = std::min(found.size(), capacity);
        auto row = ps.neighbors.row(i);
        std::copy_n(found.begin(), kept, row.begin());
        ps.neighbors.count[i] = static_cast<int>(kept);
        cut[i] = found.size() > capacity ? 1 : 0;
    });
    ps.neighbors.truncated = static_cast<std::size_t>(std::count(cut.begin(), cut.end(), 1));
}

} // namespace sph
