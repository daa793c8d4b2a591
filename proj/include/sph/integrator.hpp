#pragma once

#include "sph/common.hpp"
#include "sph/particles.hpp"

namespace sph {

/// Variable-step leapfrog in the half-step form:
///   vh^{n+1/2} = vh^{n-1/2} + a^n (dt + dt_prev) / 2
///   x^{n+1}    = x^n + dt vh^{n+1/2}
///   v^{n+1}    = vh^{n+1/2} + a^n dt / 2
/// The first step (dt_prev == 0) starts from vh = v. z is wrapped into the
/// periodic box. Updates particles [0, count) and records dt in dt_prev.
/// Throws NumericError naming the particle on a non-finite result.
void advance_positions(ParticleSystem& ps, std::size_t count, double dt, double dt_prev,
                       const PeriodicZ& periodic = {});

/// Variable-step Adams-Bashforth 2:
///   u^{n+1} = u^n + dt [(1 + r/2) du^n - (r/2) du^{n-1}],  r = dt / dt_prev
/// falling back to Euler when dt_prev == 0. Then dudt_prev <- dudt.
/// u below `u_floor` is clamped; returns the clamp count.
std::size_t advance_energy(ParticleSystem& ps, std::size_t count, double dt, double dt_prev,
                           double u_floor = 0.0);

/// h <- h (1 + (target / max(actual, 1))^{1/3}) / 2, clamped to [h_min, h_max].
double smoothing_length_update(double h, double target, double actual, double h_min, double h_max);

/// Applies smoothing_length_update with the current neighbor counts.
void update_smoothing_length(ParticleSystem& ps, std::size_t count, double target_neighbors,
                             double h_max, double h_min = 1e-6);

} // namespace sph
