#include "sph/sqpatch.hpp"

#include "sph/parallel.hpp"

#include <numbers>

namespace sph {

void SquarePatchConfig::validate() const {
    if (side < 4) throw ConfigError("square patch: side must be >= 4");
    if (layers < 1) throw ConfigError("square patch: layers must be >= 1");
    if (!(length > 0.0)) throw ConfigError("square patch: length must be positive");
    if (!(omega > 0.0)) throw ConfigError("square patch: omega must be positive");
    if (series_terms < 5 || series_terms % 2 == 0) {
        throw ConfigError("square patch: series cutoff must be odd and >= 5");
    }
    if (!(rho0 > 0.0)) throw ConfigError("square patch: rho0 must be positive");
    if (c0 < 0.0) throw ConfigError("square patch: c0 must be non-negative");
    if (!(target_neighbors > 0.0)) throw ConfigError("square patch: target neighbors must be positive");
}

double SquarePatchConfig::sound_speed() const {
    if (c0 > 0.0) return c0;
    return 10.0 * omega * length / std::numbers::sqrt2;
}

void init_positions(const SquarePatchConfig& config, ParticleSystem& ps) {
    const double dx = config.spacing();
    const double half = 0.5 * config.length;
    ps.resize(config.count());
    std::size_t i = 0;
    for (int k = 0; k < config.layers; ++k) {
        for (int j = 0; j < config.side; ++j) {
            for (int l = 0; l < config.side; ++l, ++i) {
                ps.x[i] = -half + (l + 0.5) * dx;
                ps.y[i] = -half + (j + 0.5) * dx;
                ps.z[i] = (k + 0.5) * dx;
                ps.id[i] = i;
            }
        }
    }
}

void init_velocity(const SquarePatchConfig& config, ParticleSystem& ps) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
        ps.vx[i] = config.omega * ps.y[i];
        ps.vy[i] = -config.omega * ps.x[i];
        ps.vz[i] = 0.0;
    }
}

double patch_pressure(double x, double y, double length, double omega, double rho0, int max_term) {
    constexpr double pi = std::numbers::pi;
    const double xs = x + 0.5 * length;
    const double ys = y + 0.5 * length;
    double total = 0.0;
    // Shell k gathers the terms with max(m, n) == k. Its magnitude is bounded
    // by the sum of its coefficients, which falls off like log(k) / k^3.
    for (int k = 1; k <= max_term; k += 2) {
        double shell = 0.0;
        double envelope = 0.0;
        for (int j = 1; j <= k; j += 2) {
            auto coeff = [&](int m, int n) {
                const double km = m * pi / length;
                const double kn = n * pi / length;
                return -32.0 * omega * omega / (m * n * pi * pi * (km * km + kn * kn));
            };
            const double c = coeff(k, j);
            shell += c * std::sin(k * pi * xs / length) * std::sin(j * pi * ys / length);
            envelope += std::abs(c);
            if (j != k) {
                shell += c * std::sin(j * pi * xs / length) * std::sin(k * pi * ys / length);
                envelope += std::abs(c);
            }
        }
        if (!(std::abs(shell) <= envelope * (1.0 + 1e-12))) {
            throw NumericError("square patch: pressure series diverges at (" + std::to_string(x) + ", " +
                               std::to_string(y) + ") in shell " + std::to_string(k));
        }
        total += shell;
    }
    total *= rho0;
    if (!std::isfinite(total)) throw NumericError("square patch: pressure series is not finite");
    return total;
}

void init_pressure(const SquarePatchConfig& config, ParticleSystem& ps) {
    const double c0 = config.sound_speed();
    const double plane = config.side * config.side;
    // every layer repeats the first one
    std::vector<double> p0(static_cast<std::size_t>(plane));
    parallel_for(p0.size(), [&](std::size_t i) {
        p0[i] = patch_pressure(ps.x[i], ps.y[i], config.length, config.omega, config.rho0,
                               config.series_terms);
    });
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double p = p0[i % p0.size()];
        ps.p[i] = p;
        ps.rho[i] = config.rho0 + p / (c0 * c0);
        ps.c[i] = c0;
        ps.u[i] = config.u0;
    }
}

double lattice_smoothing_length(double spacing, double target_neighbors) {
    return 0.5 * spacing * std::cbrt(3.0 * target_neighbors / (4.0 * std::numbers::pi));
}

void init_h_m(const SquarePatchConfig& config, ParticleSystem& ps) {
    const double dx = config.spacing();
    const double mass = config.rho0 * dx * dx * dx;
    const double h = lattice_smoothing_length(dx, config.target_neighbors);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        ps.m[i] = mass;
        ps.h[i] = h;
        ps.omega[i] = 1.0;
    }
}

ParticleSystem make_square_patch(const SquarePatchConfig& config) {
    config.validate();
    ParticleSystem ps;
    init_positions(config, ps);
    init_velocity(config, ps);
    init_h_m(config, ps);
    init_pressure(config, ps);
    return ps;
}

} // namespace sph
