#include "sph/integrator.hpp"

#include "sph/parallel.hpp"

#include <algorithm>

namespace sph {

void advance_positions(ParticleSystem& ps, std::size_t count, double dt, double dt_prev,
                       const PeriodicZ& periodic) {
    if (!(dt > 0.0)) throw NumericError("advance_positions: dt must be positive");
    std::vector<std::uint8_t> bad(count, 0);
    const bool bootstrap = !(dt_prev > 0.0);
    const double kick = 0.5 * (dt + (bootstrap ? 0.0 : dt_prev));
    parallel_for(count, [&](std::size_t i) {
        if (bootstrap) {
            ps.vhx[i] = ps.vx[i];
            ps.vhy[i] = ps.vy[i];
            ps.vhz[i] = ps.vz[i];
        }
        ps.vhx[i] += ps.ax[i] * kick;
        ps.vhy[i] += ps.ay[i] * kick;
        ps.vhz[i] += ps.az[i] * kick;

        ps.x[i] += dt * ps.vhx[i];
        ps.y[i] += dt * ps.vhy[i];
        ps.z[i] = periodic.wrap(ps.z[i] + dt * ps.vhz[i]);

        ps.vx[i] = ps.vhx[i] + 0.5 * dt * ps.ax[i];
        ps.vy[i] = ps.vhy[i] + 0.5 * dt * ps.ay[i];
        ps.vz[i] = ps.vhz[i] + 0.5 * dt * ps.az[i];
        ps.dt_prev[i] = dt;

        if (!std::isfinite(ps.x[i]) || !std::isfinite(ps.y[i]) || !std::isfinite(ps.z[i]) ||
            !std::isfinite(ps.vx[i]) || !std::isfinite(ps.vy[i]) || !std::isfinite(ps.vz[i])) {
            bad[i] = 1;
        }
    });
    const auto it = std::find(bad.begin(), bad.end(), 1);
    if (it != bad.end()) {
        const auto i = static_cast<std::size_t>(it - bad.begin());
        throw NumericError("advance_positions: non-finite state for particle " +
                           std::to_string(ps.id[i]));
    }
}

std::size_t advance_energy(ParticleSystem& ps, std::size_t count, double dt, double dt_prev,
                           double u_floor) {
    const bool bootstrap = !(dt_prev > 0.0);
    const double r = bootstrap ? 0.0 : dt / dt_prev;
    const double w_now = 1.0 + 0.5 * r;
    const double w_old = 0.5 * r;
    std::vector<std::uint8_t> clamped(count, 0);
    parallel_for(count, [&](std::size_t i) {
        double u = ps.u[i] + dt * (w_now * ps.dudt[i] - w_old * ps.dudt_prev[i]);
        if (u < u_floor) {
            u = u_floor;
            clamped[i] = 1;
        }
        ps.u[i] = u;
        ps.dudt_prev[i] = ps.dudt[i];
    });
    return static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
}

double smoothing_length_update(double h, double target, double actual, double h_min, double h_max) {
    const double ratio = target / std::max(actual, 1.0);
    const double next = h * 0.5 * (1.0 + std::cbrt(ratio));
    return std::clamp(next, h_min, h_max);
}

void update_smoothing_length(ParticleSystem& ps, std::size_t count, double target_neighbors,
                             double h_max, double h_min) {
    parallel_for(count, [&](std::size_t i) {
        const double actual = ps.neighbors.empty() ? 0.0 : ps.neighbors.count[i];
        ps.h[i] = smoothing_length_update(ps.h[i], target_neighbors, actual, h_min, h_max);
    });
}

} // namespace sph
