#pragma once

#include "sph/common.hpp"
#include "sph/particles.hpp"
#include "sph/physics.hpp"

namespace sph {

/// Rotating square patch, replicated along periodic z.
struct SquarePatchConfig {
    int side = 100;            // particles per edge in x and y
    int layers = 100;          // copies along z
    double length = 1.0;       // L [cm]
    double omega = 5.0;        // angular velocity [rad/s]
    int series_terms = 39;     // largest odd m, n kept in the pressure series
    double rho0 = 1.0;         // [g/cm^3]
    double c0 = 0.0;           // 0 selects 10 * omega * L / sqrt(2)
    double u0 = 1e-3;          // uniform initial specific internal energy
    double target_neighbors = 300.0;

    void validate() const;
    double spacing() const { return length / side; }
    double sound_speed() const;
    std::size_t count() const { return static_cast<std::size_t>(side) * side * layers; }
    PeriodicZ periodic() const { return {true, 0.0, layers * spacing()}; }
    EosConfig eos() const { return {rho0, sound_speed()}; }
};

/// Cubic lattice: x, y at cell centres of [-L/2, L/2], z planes at
/// (k + 1/2) dx for k < layers. Particle id = index.
void init_positions(const SquarePatchConfig& config, ParticleSystem& ps);

/// Rigid rotation v_x = omega y, v_y = -omega x, v_z = 0.
void init_velocity(const SquarePatchConfig& config, ParticleSystem& ps);

/// P0 at (x, y), patch-centred coordinates, summing odd m, n <= max_term.
/// Throws NumericError if the series misbehaves.
double patch_pressure(double x, double y, double length, double omega, double rho0, int max_term);

/// P0 from the series, rho = rho0 + P0 / c0^2, c = c0, u = u0.
void init_pressure(const SquarePatchConfig& config, ParticleSystem& ps);

/// h from (4 pi / 3) (2h)^3 / dx^3 = target_neighbors.
double lattice_smoothing_length(double spacing, double target_neighbors);

/// m = rho0 dx^3 and the lattice smoothing length for every particle.
void init_h_m(const SquarePatchConfig& config, ParticleSystem& ps);

/// All of the above.
ParticleSystem make_square_patch(const SquarePatchConfig& config);

} // namespace sph
