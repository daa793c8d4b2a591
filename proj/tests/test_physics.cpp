#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"

#include "sph/physics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using sph::ParticleSystem;
using sph::PhysicsConfig;

namespace {

const sph::SincKernel kKernel(6.0);
const sph::KernelEvaluator kDirect(kKernel);

// Cubic lattice block, spacing 1, h giving ~ 100 neighbors.
ref::State block(int side, double jitter = 0.0, unsigned seed = 1) {
    return ref::jittered_lattice(side, 1.0, jitter, 1.45, seed);
}

bool interior(const ref::State& s, std::size_t i, int side, double margin) {
    for (int d = 0; d < 3; ++d) {
        if (s.x[i][d] < margin || s.x[i][d] > side - margin) return false;
    }
    return true;
}

void random_velocities(ref::State& s, double amplitude, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    for (auto& v : s.v) v = {u(gen), u(gen), u(gen)};
}

PhysicsConfig config_with(double c0, double rho0 = 1.0, double alpha = 1.0) {
    PhysicsConfig c;
    c.eos = {rho0, c0};
    c.av.alpha = alpha;
    return c;
}

} // namespace

TEST_CASE("density of isolated and paired particles") {
    ParticleSystem ps(3);
    ps.x = {0.0, 0.7, 40.0};
    ps.h = {0.5, 0.5, 0.5};
    ps.m = {2.0, 2.0, 2.0};
    fixture::neighbors(ps, {});
    sph::compute_density({kDirect, {}, ps.size()}, ps);
    const double w0 = kKernel.w(0.0, 0.5);
    CHECK(ps.rho[2] == doctest::Approx(2.0 * w0).epsilon(1e-14));
    CHECK(ps.rho[2] == doctest::Approx(2.0 * kKernel.normalization() / 0.125).epsilon(1e-14));
    const double pair = 2.0 * (w0 + kKernel.w(0.7 / 0.5, 0.5));
    CHECK(ps.rho[0] == doctest::Approx(pair).epsilon(1e-14));
    CHECK(ps.rho[1] == ps.rho[0]);
}

TEST_CASE("omega of an isolated particle clamps to the floor") {
    ParticleSystem ps(1);
    ps.h = {0.3};
    ps.m = {1.0};
    fixture::neighbors(ps, {});
    const sph::PassContext ctx{kDirect, {}, 1};
    sph::compute_density(ctx, ps);
    const PhysicsConfig config;
    CHECK(sph::compute_omega(ctx, ps, config) == 1);
    CHECK(ps.omega[0] == 0.1);
}

TEST_CASE("omega is close to one inside a uniform lattice") {
    const int side = 12;
    const ref::State s = block(side);
    auto ps = fixture::to_system(s);
    fixture::neighbors(ps, {});
    const sph::PassContext ctx{kDirect, {}, ps.size()};
    sph::compute_density(ctx, ps);
    CHECK(sph::compute_omega(ctx, ps, PhysicsConfig{}) == 0);
    int checked = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!interior(s, i, side, 3.0)) continue;
        CHECK(ps.omega[i] == doctest::Approx(1.0).epsilon(0.05));
        ++checked;
    }
    CHECK(checked > 100);

    // mass scale cancels
    auto heavy = ps;
    for (double& m : heavy.m) m *= 2.0;
    sph::compute_density(ctx, heavy);
    sph::compute_omega(ctx, heavy, PhysicsConfig{});
    for (std::size_t i = 0; i < ps.size(); ++i) REQUIRE(heavy.omega[i] == doctest::Approx(ps.omega[i]).epsilon(1e-14));

    PhysicsConfig off;
    off.grad_h = false;
    sph::compute_omega(ctx, heavy, off);
    CHECK(std::all_of(heavy.omega.begin(), heavy.omega.end(), [](double o) { return o == 1.0; }));
}

TEST_CASE("IAD matrix inverts the moment matrix") {
    const int side = 10;
    const ref::State s = block(side, 0.2, 3);
    auto ps = fixture::to_system(s);
    fixture::neighbors(ps, {});
    const sph::PassContext ctx{kDirect, {}, ps.size()};
    sph::compute_density(ctx, ps);
    CHECK(sph::compute_iad(ctx, ps, PhysicsConfig{}) == 0);
    for (std::size_t a = 0; a < ps.size(); ++a) {
        double tau[3][3] = {};
        for (int b : ps.neighbors.of(a)) {
            const double d[3] = {ps.x[b] - ps.x[a], ps.y[b] - ps.y[a], ps.z[b] - ps.z[a]};
            const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            const double wgt = ps.m[b] / ps.rho[b] * kKernel.w(r / ps.h[a], ps.h[a]);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) tau[i][j] += wgt * d[i] * d[j];
        }
        const double C[3][3] = {{ps.c11[a], ps.c12[a], ps.c13[a]},
                                {ps.c12[a], ps.c22[a], ps.c23[a]},
                                {ps.c13[a], ps.c23[a], ps.c33[a]}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double prod = 0.0;
                for (int k = 0; k < 3; ++k) prod += C[i][k] * tau[k][j];
                REQUIRE(std::abs(prod - (i == j ? 1.0 : 0.0)) < 1e-10);
            }
    }
}

TEST_CASE("IAD reproduces linear gradients") {
    const int side = 12;
    const ref::State s = block(side, 0.15, 4);
    auto ps = fixture::to_system(s);
    fixture::neighbors(ps, {});
    const sph::PassContext ctx{kDirect, {}, ps.size()};
    sph::compute_density(ctx, ps);
    sph::compute_iad(ctx, ps, PhysicsConfig{});
    const double k[3] = {0.7, -1.3, 2.1};
    auto f = [&](std::size_t i) { return k[0] * ps.x[i] + k[1] * ps.y[i] + k[2] * ps.z[i]; };
    int checked = 0;
    for (std::size_t a = 0; a < ps.size(); ++a) {
        if (!interior(s, a, side, 3.0)) continue;
        double g[3] = {};
        for (int b : ps.neighbors.of(a)) {
            const double d[3] = {ps.x[b] - ps.x[a], ps.y[b] - ps.y[a], ps.z[b] - ps.z[a]};
            const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            const double w = kKernel.w(r / ps.h[a], ps.h[a]);
            const double A[3] = {(ps.c11[a] * d[0] + ps.c12[a] * d[1] + ps.c13[a] * d[2]) * w,
                                 (ps.c12[a] * d[0] + ps.c22[a] * d[1] + ps.c23[a] * d[2]) * w,
                                 (ps.c13[a] * d[0] + ps.c23[a] * d[1] + ps.c33[a] * d[2]) * w};
            for (int i = 0; i < 3; ++i) g[i] += ps.m[b] / ps.rho[b] * (f(b) - f(a)) * A[i];
        }
        for (int i = 0; i < 3; ++i) REQUIRE(g[i] == doctest::Approx(k[i]).epsilon(1e-3));
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("coplanar neighbors trigger the fallback") {
    ParticleSystem ps;
    ps.resize(9);
    for (int i = 0; i < 9; ++i) {
        ps.x[i] = i % 3 - 1.0;
        ps.y[i] = i / 3 - 1.0;
        ps.h[i] = 1.0;
        ps.m[i] = 1.0;
    }
    fixture::neighbors(ps, {});
    const sph::PassContext ctx{kDirect, {}, ps.size()};
    sph::compute_density(ctx, ps);
    sph::compute_omega(ctx, ps, PhysicsConfig{});
    CHECK(sph::compute_iad(ctx, ps, PhysicsConfig{}) == 9);
    CHECK(ps.iad_fallback[4] == 1);
    // forces still finite through the kernel-gradient path
    sph::apply_eos(ps, ps.size(), {1.0, 1.0});
    sph::momentum_energy(ctx, ps, PhysicsConfig{});
    for (std::size_t i = 0; i < ps.size(); ++i) CHECK(std::isfinite(ps.ax[i]));
    CHECK(ps.az[4] == 0.0);
}

TEST_CASE("equation of state") {
    ParticleSystem ps(3);
    ps.rho = {2.0, 2.02, 1.5};
    sph::apply_eos(ps, 3, {2.0, 3.0});
    CHECK(ps.p[0] == 0.0);
    CHECK(ps.p[1] == doctest::Approx(0.01 * 9.0 * 2.0));
    CHECK(ps.p[2] == doctest::Approx(-4.5));
    CHECK(ps.c[2] == 3.0);
    // affine sweep
    ParticleSystem sweep(50);
    for (int i = 0; i < 50; ++i) sweep.rho[i] = 0.5 + 0.03 * i;
    sph::apply_eos(sweep, 50, {1.0, 2.0});
    for (int i = 2; i < 50; ++i) {
        CHECK(sweep.p[i] - sweep.p[i - 1] == doctest::Approx(sweep.p[1] - sweep.p[0]).epsilon(1e-12));
    }
}

TEST_CASE("viscosity pair cases") {
    const sph::Vec3 x{1.0, 0.0, 0.0};
    SUBCASE("receding pair") {
        CHECK(sph::pair::viscosity(1.0, 1.0, 1.0, x, {0.5, 0.0, 0.0}) == 0.0);
        CHECK(sph::pair::viscosity(1.0, 1.0, 1.0, x, {0.0, 0.3, 0.0}) == 0.0);
    }
    SUBCASE("head-on approach") {
        const double s = 0.4, c = 1.5, alpha = 0.8;
        const sph::Vec3 v{-s, 0.0, 0.0};
        const double w = sph::pair::projected_velocity(x, v);
        CHECK(w == doctest::Approx(-s));
        CHECK(sph::pair::signal_velocity(c, c, w) == doctest::Approx(2.0 * c + 3.0 * s));
        CHECK(sph::pair::viscosity(alpha, c, c, x, v) ==
              doctest::Approx(-0.5 * alpha * (2.0 * c + 3.0 * s) * (-s)));
    }
    CHECK(sph::pair_density(1.0, 3.0) == 2.0);
}

TEST_CASE("static lattice interior has no forces") {
    const int side = 14;
    const ref::State s = block(side);
    auto ps = fixture::to_system(s);
    fixture::neighbors(ps, {});
    const PhysicsConfig config = config_with(10.0, 0.9);
    fixture::full_pass(ps, kDirect, config, {});
    double scale = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) scale = std::max(scale, std::abs(ps.p[i]));
    int checked = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!interior(s, i, side, 6.0)) continue;
        REQUIRE(std::abs(ps.ax[i]) < 1e-10 * scale);
        REQUIRE(std::abs(ps.ay[i]) < 1e-10 * scale);
        REQUIRE(std::abs(ps.az[i]) < 1e-10 * scale);
        REQUIRE(ps.dudt[i] == 0.0);
        ++checked;
    }
    CHECK(checked >= 8);
}

TEST_CASE("passes match the naive reference") {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ref::State s;
    s.periodic = true;
    s.zlo = 0.0;
    s.zhi = 1.0;
    for (int i = 0; i < 1000; ++i) {
        s.x.push_back({u(gen), u(gen), u(gen)});
        s.v.push_back({u(gen) - 0.5, u(gen) - 0.5, u(gen) - 0.5});
        s.h.push_back(0.15 + 0.05 * u(gen));
        s.m.push_back(1e-3 * (0.8 + 0.4 * u(gen)));
    }
    auto ps = fixture::to_system(s);
    const sph::PeriodicZ periodic = fixture::periodic_of(s);
    fixture::neighbors(ps, periodic);
    const PhysicsConfig config = config_with(2.0, 1.0, 1.0);
    fixture::full_pass(ps, kDirect, config, periodic);

    ref::Params prm;
    prm.c0 = 2.0;
    const ref::Result r = ref::evaluate(s, fixture::ref_kernel(kKernel), prm);
    std::size_t fallbacks = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        CAPTURE(i);
        REQUIRE(fixture::rel(ps.rho[i], r.rho[i], r.rho[i]) <= 1e-13);
        REQUIRE(fixture::rel(ps.omega[i], r.omega[i], std::abs(r.omega[i])) <= 1e-12);
        REQUIRE(ps.iad_fallback[i] == r.fallback[i]);
        fallbacks += r.fallback[i];
        const double C[9] = {ps.c11[i], ps.c12[i], ps.c13[i], ps.c12[i], ps.c22[i],
                             ps.c23[i], ps.c13[i], ps.c23[i], ps.c33[i]};
        const double c_scale = ref::frob(r.cinv[i]);
        for (int k = 0; k < 9; ++k) REQUIRE(fixture::rel(C[k], r.cinv[i][k], c_scale) <= 1e-12);
        // relative to the sum of pair magnitudes, which bounds the round-off of the sum
        REQUIRE(fixture::rel(ps.ax[i], r.acc[i][0], r.acc_mag[i]) <= 1e-12);
        REQUIRE(fixture::rel(ps.ay[i], r.acc[i][1], r.acc_mag[i]) <= 1e-12);
        REQUIRE(fixture::rel(ps.az[i], r.acc[i][2], r.acc_mag[i]) <= 1e-12);
        REQUIRE(fixture::rel(ps.dudt[i], r.dudt[i], r.dudt_mag[i]) <= 1e-12);
    }
    MESSAGE("reference fallbacks: " << fallbacks);
}

TEST_CASE("momentum and energy conservation under uniform h") {
    for (double alpha : {0.0, 1.0}) {
        CAPTURE(alpha);
        ref::State s = block(9, 0.25, 5);
        s.periodic = true;
        s.zlo = 0.0;
        s.zhi = 9.0;
        random_velocities(s, 0.5, 6);
        auto ps = fixture::to_system(s);
        const sph::PeriodicZ periodic = fixture::periodic_of(s);
        fixture::neighbors(ps, periodic);
        const PhysicsConfig config = config_with(3.0, 1.0, alpha);
        fixture::full_pass(ps, kDirect, config, periodic);

        double p[3] = {}, p_scale = 0.0, power = 0.0, heating = 0.0, e_scale = 0.0;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            p[0] += ps.m[i] * ps.ax[i];
            p[1] += ps.m[i] * ps.ay[i];
            p[2] += ps.m[i] * ps.az[i];
            p_scale += ps.m[i] * std::hypot(ps.ax[i], ps.ay[i], ps.az[i]);
            const double vdota = ps.vx[i] * ps.ax[i] + ps.vy[i] * ps.ay[i] + ps.vz[i] * ps.az[i];
            power += ps.m[i] * vdota;
            heating += ps.m[i] * ps.dudt[i];
            e_scale += ps.m[i] * std::abs(vdota);
        }
        for (double component : p) CHECK(std::abs(component) <= 1e-10 * p_scale);
        CHECK(std::abs(power + heating) <= 1e-8 * e_scale);
    }
}

TEST_CASE("artificial viscosity only heats") {
    for (unsigned seed : {7u, 8u, 9u}) {
        ref::State s = block(8, 0.3, seed);
        random_velocities(s, 1.0, seed + 100);
        auto ps = fixture::to_system(s);
        fixture::neighbors(ps, {});
        const PhysicsConfig config = config_with(1.0);
        const sph::PassContext ctx{kDirect, {}, ps.size()};
        sph::compute_density(ctx, ps);
        sph::compute_omega(ctx, ps, config);
        sph::apply_eos(ps, ps.size(), config.eos);
        sph::compute_iad(ctx, ps, config);
        std::vector<double> heat(ps.size());
        sph::momentum_energy(ctx, ps, config, heat);
        double total = 0.0;
        for (std::size_t i = 0; i < ps.size(); ++i) total += ps.m[i] * heat[i];
        CHECK(total > 0.0);
    }
}

TEST_CASE("coincident particles are skipped and counted") {
    ParticleSystem ps(3);
    ps.x = {0.0, 0.0, 0.5};
    ps.h = {1.0, 1.0, 1.0};
    ps.m = {1.0, 1.0, 1.0};
    fixture::neighbors(ps, {});
    const sph::PassContext ctx{kDirect, {}, ps.size()};
    sph::compute_density(ctx, ps);
    sph::compute_omega(ctx, ps, PhysicsConfig{});
    sph::apply_eos(ps, 3, {1.0, 1.0});
    sph::compute_iad(ctx, ps, PhysicsConfig{});
    const auto stats = sph::momentum_energy(ctx, ps, PhysicsConfig{});
    CHECK(stats.coincident_pairs == 2);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::isfinite(ps.ax[i]));
}

TEST_CASE("time-step bound") {
    const int side = 6;
    ref::State s = block(side);
    auto ps = fixture::to_system(s);
    fixture::neighbors(ps, {});
    const double c0 = 2.0;
    fixture::full_pass(ps, kDirect, config_with(c0), {});
    const double dt = sph::compute_timestep(ps, ps.size(), 0.3, 0.0);
    CHECK(dt == doctest::Approx(0.3 * 1.45 / (2.0 * c0)).epsilon(1e-14));
    CHECK(sph::compute_timestep(ps, ps.size(), 0.3, 0.5 * dt) == doctest::Approx(0.55 * dt));

    auto half = s;
    for (double& h : half.h) h *= 0.5;
    auto ps_half = fixture::to_system(half);
    fixture::neighbors(ps_half, {});
    fixture::full_pass(ps_half, kDirect, config_with(c0), {});
    CHECK(sph::compute_timestep(ps_half, ps_half.size(), 0.3, 0.0) == doctest::Approx(0.5 * dt).epsilon(1e-14));

    // converging flow of growing strength
    double previous = dt;
    for (double strength : {0.1, 0.3, 0.6, 1.0, 2.0}) {
        auto conv = s;
        for (std::size_t i = 0; i < conv.size(); ++i)
            for (int d = 0; d < 3; ++d) conv.v[i][d] = -strength * (conv.x[i][d] - 0.5 * side);
        auto pc = fixture::to_system(conv);
        fixture::neighbors(pc, {});
        fixture::full_pass(pc, kDirect, config_with(c0, 1.0, 0.0), {});
        const double next = sph::compute_timestep(pc, pc.size(), 0.3, 0.0);
        CHECK(next <= previous);
        previous = next;
    }
    CHECK(previous < dt);
}

TEST_CASE("configuration validation") {
    PhysicsConfig bad;
    bad.eos.c0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), sph::ConfigError);
    bad = PhysicsConfig{};
    bad.av.alpha = -1.0;
    CHECK_THROWS_AS(bad.validate(), sph::ConfigError);
    CHECK_NOTHROW(PhysicsConfig{}.validate());
}

TEST_CASE("density rejects pathological input") {
    ParticleSystem ps(2);
    ps.x = {0.0, 0.5};
    ps.h = {1.0, 1.0};
    ps.m = {1.0, -5.0};
    fixture::neighbors(ps, {});
    CHECK_THROWS_AS(sph::compute_density({kDirect, {}, 2}, ps), sph::NumericError);
}
