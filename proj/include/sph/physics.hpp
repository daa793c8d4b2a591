#pragma once

#include "sph/common.hpp"
#include "sph/kernel.hpp"
#include "sph/particles.hpp"

#include <span>

namespace sph {

/// Linear weakly compressible closure: P = c0^2 (rho - rho0), c = c0.
struct EosConfig {
    double rho0 = 1.0;
    double c0 = 1.0;
};

struct AvConfig {
    double alpha = 1.0;
};

struct PhysicsConfig {
    EosConfig eos{};
    AvConfig av{};
    bool grad_h = true;  // false pins Omega = 1
    double omega_floor = 0.1;
    double iad_condition_limit = 1e12;
    double courant = 0.3;

    void validate() const;
};

/// Geometry and kernel shared by the per-particle passes. Each pass updates
/// particles [0, count) of the system and reads any neighbor, so halo
/// entries stored after `count` only need their inputs filled in.
struct PassContext {
    const KernelEvaluator& kernel;
    PeriodicZ periodic{};
    std::size_t count = 0;
};

/// rho_a = sum_b m_b W(|x_ab| / h_a, h_a), self term included.
/// Throws NumericError on a non-positive result.
void compute_density(const PassContext& ctx, ParticleSystem& ps);

/// Omega_a = 1 + h_a / (3 rho_a) sum_b m_b dW_ab(h_a)/dh. Values below the
/// floor are clamped; returns how many were.
std::size_t compute_omega(const PassContext& ctx, ParticleSystem& ps, const PhysicsConfig& config);

/// Inverse of tau_ij = sum_b (m_b/rho_b) x_i,ba x_j,ba W_ab(h_a) into
/// c11..c33. Singular or ill-conditioned matrices set iad_fallback and use
/// plain kernel gradients downstream; returns the fallback count.
std::size_t compute_iad(const PassContext& ctx, ParticleSystem& ps, const PhysicsConfig& config);

/// P and c from the linear weakly compressible closure.
void apply_eos(ParticleSystem& ps, std::size_t count, const EosConfig& eos);

struct MomentumStats {
    std::size_t coincident_pairs = 0;
};

/// Pressure and artificial-viscosity accelerations, energy rates and the
/// per-particle maximum signal velocity. `av_heating`, when non-empty,
/// receives the viscous part of du/dt per particle.
MomentumStats momentum_energy(const PassContext& ctx, ParticleSystem& ps,
                              const PhysicsConfig& config, std::span<double> av_heating = {});

/// min_a courant * h_a / vsig_max_a over [0, count), capped at 1.1 * dt_prev
/// when dt_prev > 0. Throws NumericError if the result is not finite.
double compute_timestep(const ParticleSystem& ps, std::size_t count, double courant,
                        double dt_prev);

/// Pairwise density with rho_ab^-1 = 2 (rho_a + rho_b)^-1. Not used by the
/// force terms.
inline double pair_density(double rho_a, double rho_b) { return 0.5 * (rho_a + rho_b); }

/// Pieces of the pair interaction, exposed for testing.
namespace pair {

/// w_ab = v_ab . x_ab / |x_ab|
inline double projected_velocity(const Vec3& x_ab, const Vec3& v_ab) {
    const double r = std::sqrt(x_ab[0] * x_ab[0] + x_ab[1] * x_ab[1] + x_ab[2] * x_ab[2]);
    return (v_ab[0] * x_ab[0] + v_ab[1] * x_ab[1] + v_ab[2] * x_ab[2]) / r;
}

inline double signal_velocity(double c_a, double c_b, double w_ab) { return c_a + c_b - 3.0 * w_ab; }

/// Pi'_ab = -(alpha/2) v_sig w_ab for approaching pairs, else 0.
inline double viscosity(double alpha, double c_a, double c_b, const Vec3& x_ab, const Vec3& v_ab) {
    const double xv = x_ab[0] * v_ab[0] + x_ab[1] * v_ab[1] + x_ab[2] * v_ab[2];
    if (!(xv < 0.0)) return 0.0;
    const double w = projected_velocity(x_ab, v_ab);
    return -0.5 * alpha * signal_velocity(c_a, c_b, w) * w;
}

} // namespace pair

} // namespace sph
