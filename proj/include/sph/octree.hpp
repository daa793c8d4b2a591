#pragma once

#include "sph/common.hpp"
#include "sph/particles.hpp"

#include <span>
#include <vector>

namespace sph {

struct Box {
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{0.0, 0.0, 0.0};

    bool contains(double x, double y, double z) const {
        return x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] && z >= lo[2] && z <= hi[2];
    }
    bool contains(const Box& other) const {
        return contains(other.lo[0], other.lo[1], other.lo[2]) &&
               contains(other.hi[0], other.hi[1], other.hi[2]);
    }
    Vec3 center() const {
        return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])};
    }
    double diagonal() const;
};

/// Componentwise union; an empty box (lo > hi) is the identity.
Box merge(const Box& a, const Box& b);
Box empty_box();

/// Tight min/max over the given coordinates. Empty input yields empty_box().
Box raw_bounds(std::span<const double> x, std::span<const double> y, std::span<const double> z);

/// Inflates a raw bound by `slack` of the extent on each side (degenerate
/// extents use an absolute slack) and pins z to the periodic box if enabled.
Box inflate(const Box& raw, double slack, const PeriodicZ& periodic);

/// raw_bounds + inflate. Throws ConfigError for an empty system.
Box compute_bbox(const ParticleSystem& ps, double slack = 0.005, const PeriodicZ& periodic = {});

struct OctreeNode {
    Box box;
    int first_child = -1;  // 8 consecutive children, -1 for a leaf
    std::size_t begin = 0;
    std::size_t end = 0;
    int depth = 0;
    double h_max = 0.0;

    bool leaf() const { return first_child < 0; }
    std::size_t count() const { return end - begin; }
};

/// Octree over a set of particles. Leaves hold contiguous ranges of order();
/// order() is the depth-first particle sequence (octant bits x | y<<1 | z<<2).
class Octree {
public:
    struct Options {
        std::size_t bucket_size = 64;
        int max_depth = 21;
        PeriodicZ periodic{};
    };

    Octree() = default;

    /// Splits every node holding more than bucket_size particles. `h` may be
    /// empty; when given, nodes carry the maximum smoothing length below them.
    /// Throws ConfigError naming the first particle outside `box`.
    static Octree build(std::span<const double> x, std::span<const double> y,
                        std::span<const double> z, std::span<const double> h, const Box& box,
                        const Options& options);
    static Octree build(const ParticleSystem& ps, const Box& box, const Options& options) {
        return build(ps.x, ps.y, ps.z, ps.h, box, options);
    }

    /// Re-bins particles into the existing cells. Returns false, leaving the
    /// tree unusable until rebuilt, when a particle left the root box or the
    /// refreshed counts call for a rebuild (see needs_rebuild).
    bool refresh(std::span<const double> x, std::span<const double> y, std::span<const double> z,
                 std::span<const double> h);

    /// True when a leaf holds more than 2x bucket_size or an internal node
    /// fewer than bucket_size / 2 particles.
    bool needs_rebuild() const;

    const Box& box() const { return nodes_.front().box; }
    const Options& options() const { return options_; }
    std::span<const OctreeNode> nodes() const { return nodes_; }
    const OctreeNode& root() const { return nodes_.front(); }
    /// Leaf node indices in depth-first order.
    std::span<const int> leaves() const { return leaves_; }
    std::span<const std::size_t> order() const { return order_; }
    std::size_t particle_count() const { return order_.size(); }

    /// Leaf index (position in leaves()) containing each particle.
    std::vector<int> leaf_of_particles() const;
    /// Leaf position (in leaves()) whose cell contains the point, -1 if outside.
    int locate(double x, double y, double z) const;

    /// Squared distance from a point to a cell, min-image along periodic z.
    double box_distance2(const Box& box, double x, double y, double z) const;
    double box_box_distance2(const Box& a, const Box& b) const;

    /// Calls visit(j) for every particle j with min-image distance strictly
    /// below `radius` from the point.
    template <class Visit>
    void for_each_within(std::span<const double> x, std::span<const double> y,
                         std::span<const double> z, double px, double py, double pz, double radius,
                         Visit&& visit) const;

    /// True if some particle j satisfies |p - x_j| < 2 h_j (scatter query).
    /// Requires a tree built with smoothing lengths.
    bool any_reaches(std::span<const double> x, std::span<const double> y,
                     std::span<const double> z, std::span<const double> h, double px, double py,
                     double pz) const;

private:
    void split(std::span<const double> x, std::span<const double> y, std::span<const double> z,
               int node, std::vector<std::size_t>& scratch);
    void finalize(std::span<const double> h);

    Options options_{};
    std::vector<OctreeNode> nodes_;
    std::vector<int> leaves_;
    std::vector<int> leaf_position_;
    std::vector<std::size_t> order_;
};

template <class Visit>
void Octree::for_each_within(std::span<const double> x, std::span<const double> y,
                             std::span<const double> z, double px, double py, double pz,
                             double radius, Visit&& visit) const {
    const double r2 = radius * radius;
    const double prune = r2 * (1.0 + 1e-10);
    int stack[8 * 64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const OctreeNode& node = nodes_[stack[--top]];
        if (node.count() == 0 || box_distance2(node.box, px, py, pz) > prune) continue;
        if (!node.leaf()) {
            for (int c = 7; c >= 0; --c) stack[top++] = node.first_child + c;
            continue;
        }
        for (std::size_t k = node.begin; k < node.end; ++k) {
            const std::size_t j = order_[k];
            const double dx = x[j] - px;
            const double dy = y[j] - py;
            const double dz = options_.periodic.min_image(z[j] - pz);
            if (dx * dx + dy * dy + dz * dz < r2) visit(j);
        }
    }
}

/// Fills ps.neighbors for particles [0, query_count): every j != i with
/// min-image distance below 2 h_i, sorted by particle id and cut at
/// `capacity`. The tree must index the current positions of all of `ps`.
void find_neighbors(const Octree& tree, ParticleSystem& ps, std::size_t query_count,
                    std::size_t capacity);

} // namespace sph
