#pragma once

#include "sph/common.hpp"

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace sph {

/// Fixed-capacity neighbor slots, one row of `capacity` entries per particle.
/// Lists longer than the capacity are cut and the particle is counted in
/// `truncated`.
struct NeighborList {
    std::size_t capacity = 0;
    std::vector<int> slots;
    std::vector<int> count;
    std::size_t truncated = 0;

    void reset(std::size_t particles, std::size_t cap);
    void clear() { reset(0, capacity); }

    std::span<const int> of(std::size_t i) const {
        return {slots.data() + i * capacity, static_cast<std::size_t>(count[i])};
    }
    std::span<int> row(std::size_t i) { return {slots.data() + i * capacity, capacity}; }
    bool empty() const { return count.empty(); }
};

/// Structure-of-arrays particle state. All double fields listed in
/// field_table() have the same length; `id` is the persistent particle
/// identity used to match particles across reorderings and ranks.
class ParticleSystem {
public:
    using Field = std::vector<double> ParticleSystem::*;

    struct FieldDesc {
        std::string_view name;
        Field member;
    };

    ParticleSystem() = default;
    explicit ParticleSystem(std::size_t n) { resize(n); }

    std::size_t size() const { return x.size(); }
    void resize(std::size_t n);

    /// Persistent fields in checkpoint order.
    static std::span<const FieldDesc> field_table();

    /// Reorders every per-particle array so that new[i] = old[order[i]].
    /// Neighbor lists are dropped since their indices no longer apply.
    /// Throws ConfigError if `order` is not a permutation of 0..n-1.
    void permute(std::span<const std::size_t> order);

    /// Appends particle i of `src` (all persistent fields and id).
    void push_back_from(const ParticleSystem& src, std::size_t i);

    /// Keeps the first n particles.
    void truncate(std::size_t n);

    double total_mass() const;

    // kinematics
    std::vector<double> x, y, z;
    std::vector<double> vx, vy, vz;
    // thermodynamics
    std::vector<double> u, h, m, rho, p, c;
    // rates
    std::vector<double> ax, ay, az, dudt, dudt_prev;
    std::vector<double> omega;
    // symmetric inverse moment matrix for IAD gradients
    std::vector<double> c11, c12, c13, c22, c23, c33;
    // half-step velocity and last step size, kept for the leapfrog update
    std::vector<double> vhx, vhy, vhz, dt_prev;

    std::vector<std::uint64_t> id;

    // Transient per-step quantities; not checkpointed.
    std::vector<double> vsig_max;
    std::vector<std::uint8_t> iad_fallback;
    NeighborList neighbors;
};

inline constexpr char kCheckpointMagic[4] = {'S', 'P', 'H', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ParticleSystem particles;
    std::uint64_t iteration = 0;
    double time = 0.0;
};

/// Little-endian binary: magic "SPHM", u32 version, u64 count, u64
/// iteration, f64 time, then each persistent field as raw f64 in
/// field_table() order. Particles are written in storage order; ids are
/// not stored and are reassigned as 0..n-1 on load.
void write_checkpoint(const std::filesystem::path& path, const ParticleSystem& particles,
                      std::uint64_t iteration, double time);
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace sph
