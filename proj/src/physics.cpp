#include "sph/physics.hpp"

#include "sph/parallel.hpp"

#include <algorithm>
#include <limits>

namespace sph {

void PhysicsConfig::validate() const {
    if (!(eos.rho0 > 0.0)) throw ConfigError("eos: rho0 must be positive");
    if (!(eos.c0 > 0.0)) throw ConfigError("eos: c0 must be positive");
    if (!(av.alpha >= 0.0)) throw ConfigError("av: alpha must be non-negative");
    if (!(courant > 0.0)) throw ConfigError("courant factor must be positive");
}

namespace {

struct Separation {
    double x, y, z, r;
};

inline Separation separation(const ParticleSystem& ps, const PeriodicZ& periodic, std::size_t a,
                             std::size_t b) {
    Separation s;
    s.x = ps.x[a] - ps.x[b];
    s.y = ps.y[a] - ps.y[b];
    s.z = periodic.min_image(ps.z[a] - ps.z[b]);
    s.r = std::sqrt(s.x * s.x + s.y * s.y + s.z * s.z);
    return s;
}

std::size_t count_flags(const std::vector<std::uint8_t>& flags) {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1));
}

} // namespace

void compute_density(const PassContext& ctx, ParticleSystem& ps) {
    const auto& kernel = ctx.kernel;
    std::vector<std::uint8_t> bad(ctx.count, 0);
    parallel_for(ctx.count, [&](std::size_t a) {
        const double ha = ps.h[a];
        double rho = ps.m[a] * kernel.w(0.0, ha);
        for (int b : ps.neighbors.of(a)) {
            const Separation s = separation(ps, ctx.periodic, a, b);
            rho += ps.m[b] * kernel.w(s.r / ha, ha);
        }
        ps.rho[a] = rho;
        if (!(rho > 0.0) || !std::isfinite(rho)) bad[a] = 1;
    });
    const auto it = std::find(bad.begin(), bad.end(), 1);
    if (it != bad.end()) {
        const auto a = static_cast<std::size_t>(it - bad.begin());
        throw NumericError("density: non-positive density " + std::to_string(ps.rho[a]) +
                           " for particle " + std::to_string(ps.id[a]));
    }
}

std::size_t compute_omega(const PassContext& ctx, ParticleSystem& ps, const PhysicsConfig& config) {
    if (!config.grad_h) {
        std::fill_n(ps.omega.begin(), ctx.count, 1.0);
        return 0;
    }
    const auto& kernel = ctx.kernel;
    std::vector<std::uint8_t> clamped(ctx.count, 0);
    parallel_for(ctx.count, [&](std::size_t a) {
        const double ha = ps.h[a];
        double drho_dh = ps.m[a] * kernel.dw_dh(0.0, ha);
        for (int b : ps.neighbors.of(a)) {
            const Separation s = separation(ps, ctx.periodic, a, b);
            drho_dh += ps.m[b] * kernel.dw_dh(s.r / ha, ha);
        }
        double omega = 1.0 + ha / (3.0 * ps.rho[a]) * drho_dh;
        if (!(omega >= config.omega_floor)) {
            omega = config.omega_floor;
            clamped[a] = 1;
        }
        ps.omega[a] = omega;
    });
    return count_flags(clamped);
}

std::size_t compute_iad(const PassContext& ctx, ParticleSystem& ps, const PhysicsConfig& config) {
    const auto& kernel = ctx.kernel;
    parallel_for(ctx.count, [&](std::size_t a) {
        const double ha = ps.h[a];
        double t11 = 0, t12 = 0, t13 = 0, t22 = 0, t23 = 0, t33 = 0;
        for (int b : ps.neighbors.of(a)) {
            const Separation s = separation(ps, ctx.periodic, a, b);
            const double weight = ps.m[b] / ps.rho[b] * kernel.w(s.r / ha, ha);
            // x_ba = -x_ab; the products are even in the sign.
            t11 += weight * s.x * s.x;
            t12 += weight * s.x * s.y;
            t13 += weight * s.x * s.z;
            t22 += weight * s.y * s.y;
            t23 += weight * s.y * s.z;
            t33 += weight * s.z * s.z;
        }
        const double k11 = t22 * t33 - t23 * t23;
        const double k12 = t13 * t23 - t12 * t33;
        const double k13 = t12 * t23 - t13 * t22;
        const double k22 = t11 * t33 - t13 * t13;
        const double k23 = t12 * t13 - t11 * t23;
        const double k33 = t11 * t22 - t12 * t12;
        const double det = t11 * k11 + t12 * k12 + t13 * k13;

        const double norm_t = std::sqrt(t11 * t11 + t22 * t22 + t33 * t33 +
                                        2.0 * (t12 * t12 + t13 * t13 + t23 * t23));
        bool singular = !(det > 0.0) || !std::isfinite(det);
        if (!singular) {
            const double inv = 1.0 / det;
            ps.c11[a] = k11 * inv;
            ps.c12[a] = k12 * inv;
            ps.c13[a] = k13 * inv;
            ps.c22[a] = k22 * inv;
            ps.c23[a] = k23 * inv;
            ps.c33[a] = k33 * inv;
            const double norm_c =
                std::sqrt(ps.c11[a] * ps.c11[a] + ps.c22[a] * ps.c22[a] + ps.c33[a] * ps.c33[a] +
                          2.0 * (ps.c12[a] * ps.c12[a] + ps.c13[a] * ps.c13[a] +
                                 ps.c23[a] * ps.c23[a]));
            singular = !(norm_t * norm_c <= config.iad_condition_limit);
        }
        if (singular) {
            ps.c11[a] = ps.c22[a] = ps.c33[a] = 0.0;
            ps.c12[a] = ps.c13[a] = ps.c23[a] = 0.0;
        }
        ps.iad_fallback[a] = singular ? 1 : 0;
    });
    return count_flags({ps.iad_fallback.begin(),
                        ps.iad_fallback.begin() + static_cast<std::ptrdiff_t>(ctx.count)});
}

void apply_eos(ParticleSystem& ps, std::size_t count, const EosConfig& eos) {
    const double c2 = eos.c0 * eos.c0;
    parallel_for(count, [&](std::size_t a) {
        ps.p[a] = c2 * (ps.rho[a] - eos.rho0);
        ps.c[a] = eos.c0;
    });
}

namespace {

// A_ab(h_k) for the particle k whose matrix and smoothing length are used:
// C_k (x_b - x_a) W(r/h_k, h_k), or the kernel gradient with respect to x_a
// when k fell back. x_ab = x_a - x_b.
inline Vec3 iad_term(const ParticleSystem& ps, const KernelEvaluator& kernel, std::size_t k,
                     const Separation& s) {
    const double hk = ps.h[k];
    const double v = s.r / hk;
    if (ps.iad_fallback[k]) {
        const double g = kernel.dw_dv(v, hk) / (hk * s.r);
        return {g * s.x, g * s.y, g * s.z};
    }
    const double w = kernel.w(v, hk);
    return {-(ps.c11[k] * s.x + ps.c12[k] * s.y + ps.c13[k] * s.z) * w,
            -(ps.c12[k] * s.x + ps.c22[k] * s.y + ps.c23[k] * s.z) * w,
            -(ps.c13[k] * s.x + ps.c23[k] * s.y + ps.c33[k] * s.z) * w};
}

} // namespace

MomentumStats momentum_energy(const PassContext& ctx, ParticleSystem& ps,
                              const PhysicsConfig& config, std::span<double> av_heating) {
    const auto& kernel = ctx.kernel;
    const double alpha = config.av.alpha;
    std::vector<std::uint32_t> coincident(ctx.count, 0);
    parallel_for(ctx.count, [&](std::size_t a) {
        const double rho_a = ps.rho[a];
        const double pro_a = ps.p[a] / (ps.omega[a] * rho_a * rho_a);
        double ax = 0.0, ay = 0.0, az = 0.0;
        double work = 0.0;   // sum_b m_b v_ab . A_ab(h_a)
        double heat = 0.0;   // -1/2 sum_b v_ab . a^AV_ab
        double vsig_max = 2.0 * ps.c[a];
        for (int bi : ps.neighbors.of(a)) {
            const auto b = static_cast<std::size_t>(bi);
            const Separation s = separation(ps, ctx.periodic, a, b);
            if (s.r == 0.0) {
                ++coincident[a];
                continue;
            }
            const double mb = ps.m[b];
            const double vx = ps.vx[a] - ps.vx[b];
            const double vy = ps.vy[a] - ps.vy[b];
            const double vz = ps.vz[a] - ps.vz[b];
            const Vec3 A_a = iad_term(ps, kernel, a, s);
            const Vec3 A_b = iad_term(ps, kernel, b, s);

            const double rho_b = ps.rho[b];
            const double pro_b = ps.p[b] / (ps.omega[b] * rho_b * rho_b);
            ax -= mb * (pro_a * A_a[0] + pro_b * A_b[0]);
            ay -= mb * (pro_a * A_a[1] + pro_b * A_b[1]);
            az -= mb * (pro_a * A_a[2] + pro_b * A_b[2]);
            work += mb * (vx * A_a[0] + vy * A_a[1] + vz * A_a[2]);

            const double xv = s.x * vx + s.y * vy + s.z * vz;
            const double w_ab = xv / s.r;
            const double vsig = pair::signal_velocity(ps.c[a], ps.c[b], w_ab);
            vsig_max = std::max(vsig_max, vsig);
            if (xv < 0.0) {
                const double visc = -0.5 * alpha * vsig * w_ab;
                // Repulsive for approaching pairs.
                const double f = -0.5 * mb * visc;
                const double avx = f * (A_a[0] / rho_a + A_b[0] / rho_b);
                const double avy = f * (A_a[1] / rho_a + A_b[1] / rho_b);
                const double avz = f * (A_a[2] / rho_a + A_b[2] / rho_b);
                ax += avx;
                ay += avy;
                az += avz;
                heat -= 0.5 * (vx * avx + vy * avy + vz * avz);
            }
        }
        ps.ax[a] = ax;
        ps.ay[a] = ay;
        ps.az[a] = az;
        ps.dudt[a] = pro_a * work + heat;
        ps.vsig_max[a] = vsig_max;
        if (!av_heating.empty()) av_heating[a] = heat;
    });
    MomentumStats stats;
    for (auto k : coincident) stats.coincident_pairs += k;
    return stats;
}

double compute_timestep(const ParticleSystem& ps, std::size_t count, double courant,
                        double dt_prev) {
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < count; ++a) {
        dt = std::min(dt, courant * ps.h[a] / ps.vsig_max[a]);
    }
    if (dt_prev > 0.0) dt = std::min(dt, 1.1 * dt_prev);
    if (count > 0 && (!std::isfinite(dt) || !(dt > 0.0))) {
        throw NumericError("timestep: non-finite or non-positive dt " + std::to_string(dt));
    }
    return dt;
}

} // namespace sph
