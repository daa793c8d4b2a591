#pragma once

#include "reference.hpp"

#include "sph/octree.hpp"
#include "sph/particles.hpp"
#include "sph/physics.hpp"

#include <algorithm>
#include <cmath>

namespace fixture {

inline sph::ParticleSystem to_system(const ref::State& s) {
    sph::ParticleSystem ps(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        ps.x[i] = s.x[i][0];
        ps.y[i] = s.x[i][1];
        ps.z[i] = s.x[i][2];
        ps.vx[i] = s.v[i][0];
        ps.vy[i] = s.v[i][1];
        ps.vz[i] = s.v[i][2];
        ps.h[i] = s.h[i];
        ps.m[i] = s.m[i];
    }
    return ps;
}

inline sph::PeriodicZ periodic_of(const ref::State& s) { return {s.periodic, s.zlo, s.zhi}; }

inline ref::Kernel ref_kernel(const sph::SincKernel& k) {
    return {[&k](double v, double h) { return k.w(v, h); },
            [&k](double v, double h) { return k.dw_dv(v, h); }};
}

/// Tree over the whole system and neighbor lists for every particle.
inline void neighbors(sph::ParticleSystem& ps, const sph::PeriodicZ& periodic,
                      std::size_t bucket = 16, std::size_t capacity = 4096) {
    sph::Box box = sph::compute_bbox(ps, 0.005, periodic);
    sph::Octree::Options opt;
    opt.bucket_size = bucket;
    opt.periodic = periodic;
    const auto tree = sph::Octree::build(ps.x, ps.y, ps.z, ps.h, box, opt);
    sph::find_neighbors(tree, ps, ps.size(), capacity);
}

/// density, Omega, EOS, IAD and momentum/energy over every particle.
inline void full_pass(sph::ParticleSystem& ps, const sph::KernelEvaluator& kernel,
                      const sph::PhysicsConfig& config, const sph::PeriodicZ& periodic) {
    const sph::PassContext ctx{kernel, periodic, ps.size()};
    sph::compute_density(ctx, ps);
    sph::compute_omega(ctx, ps, config);
    sph::apply_eos(ps, ps.size(), config.eos);
    sph::compute_iad(ctx, ps, config);
    sph::momentum_energy(ctx, ps, config);
}

inline double rel(double a, double b, double scale) { return std::abs(a - b) / scale; }

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace fixture
