#pragma once

// Naive O(n^2) reference implementations used as test oracles. Everything
// here is written from the formulas directly and shares no code with the
// library beyond the kernel function passed in.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace ref {

using V3 = std::array<double, 3>;

struct Kernel {
    std::function<double(double, double)> w;      // W(v, h)
    std::function<double(double, double)> dw_dv;  // dW/dv(v, h)
};

struct State {
    std::vector<V3> x, v;
    std::vector<double> h, m;
    bool periodic = false;
    double zlo = 0.0, zhi = 0.0;

    std::size_t size() const { return x.size(); }

    V3 sep(std::size_t a, std::size_t b) const {
        V3 d{x[a][0] - x[b][0], x[a][1] - x[b][1], x[a][2] - x[b][2]};
        if (periodic) {
            const double L = zhi - zlo;
            while (d[2] > 0.5 * L) d[2] -= L;
            while (d[2] < -0.5 * L) d[2] += L;
        }
        return d;
    }
    double dist(std::size_t a, std::size_t b) const {
        const V3 d = sep(a, b);
        return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    }
};

inline std::vector<std::vector<std::size_t>> neighbors(const State& s) {
    std::vector<std::vector<std::size_t>> out(s.size());
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = 0; b < s.size(); ++b) {
            if (a != b && s.dist(a, b) < 2.0 * s.h[a]) out[a].push_back(b);
        }
    }
    return out;
}

struct Result {
    std::vector<double> rho, omega, p, c;
    std::vector<std::array<double, 9>> cinv;  // row-major inverse moment matrix
    std::vector<bool> fallback;
    std::vector<V3> acc;
    std::vector<double> dudt;
    std::vector<double> acc_mag, dudt_mag;  // sums of |pair contribution|
};

/// Adjugate over determinant (first-row expansion).
inline bool invert3(const std::array<double, 9>& m, std::array<double, 9>& inv) {
    auto at = [&](int i, int j) { return m[((i % 3 + 3) % 3) * 3 + (j % 3 + 3) % 3]; };
    std::array<double, 9> cof{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            cof[i * 3 + j] = at(i + 1, j + 1) * at(i + 2, j + 2) - at(i + 1, j + 2) * at(i + 2, j + 1);
        }
    }
    const double det = m[0] * cof[0] + m[1] * cof[1] + m[2] * cof[2];
    if (det == 0.0) return false;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) inv[i * 3 + j] = cof[j * 3 + i] / det;
    }
    return true;
}

inline double frob(const std::array<double, 9>& m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
}

struct Params {
    double rho0 = 1.0, c0 = 1.0, alpha = 1.0;
    bool grad_h = true;
    double omega_floor = 0.1;
    double cond_limit = 1e12;
};

/// Full chain density -> Omega -> EOS -> IAD -> momentum/energy.
inline Result evaluate(const State& s, const Kernel& k, const Params& prm) {
    const std::size_t n = s.size();
    const auto nb = neighbors(s);
    Result r;
    r.rho.assign(n, 0.0);
    r.omega.assign(n, 1.0);
    r.p.assign(n, 0.0);
    r.c.assign(n, prm.c0);
    r.cinv.assign(n, {});
    r.fallback.assign(n, false);
    r.acc.assign(n, {0.0, 0.0, 0.0});
    r.dudt.assign(n, 0.0);
    r.acc_mag.assign(n, 0.0);
    r.dudt_mag.assign(n, 0.0);

    for (std::size_t a = 0; a < n; ++a) {
        double rho = s.m[a] * k.w(0.0, s.h[a]);
        for (std::size_t b : nb[a]) rho += s.m[b] * k.w(s.dist(a, b) / s.h[a], s.h[a]);
        r.rho[a] = rho;
    }
    for (std::size_t a = 0; a < n; ++a) {
        if (!prm.grad_h) continue;
        const double h = s.h[a];
        auto dwdh = [&](double v) { return -(3.0 * k.w(v, h) + v * k.dw_dv(v, h)) / h; };
        double sum = s.m[a] * dwdh(0.0);
        for (std::size_t b : nb[a]) sum += s.m[b] * dwdh(s.dist(a, b) / h);
        r.omega[a] = std::max(1.0 + h / (3.0 * r.rho[a]) * sum, prm.omega_floor);
    }
    for (std::size_t a = 0; a < n; ++a) r.p[a] = prm.c0 * prm.c0 * (r.rho[a] - prm.rho0);

    for (std::size_t a = 0; a < n; ++a) {
        std::array<double, 9> tau{};
        for (std::size_t b : nb[a]) {
            const V3 d = s.sep(b, a);
            const double wgt = s.m[b] / r.rho[b] * k.w(s.dist(a, b) / s.h[a], s.h[a]);
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) tau[i * 3 + j] += wgt * d[i] * d[j];
            }
        }
        std::array<double, 9> inv{};
        bool ok = invert3(tau, inv) && frob(inv) > 0.0;
        if (ok) {
            const double det = tau[0] * (tau[4] * tau[8] - tau[5] * tau[7]) -
                               tau[1] * (tau[3] * tau[8] - tau[5] * tau[6]) +
                               tau[2] * (tau[3] * tau[7] - tau[4] * tau[6]);
            ok = det > 0.0;
        }
        if (ok) ok = frob(tau) * frob(inv) <= prm.cond_limit;
        r.fallback[a] = !ok;
        r.cinv[a] = ok ? inv : std::array<double, 9>{};
    }

    // A_ab evaluated with particle k's smoothing length and matrix.
    auto grad = [&](std::size_t k_idx, std::size_t a, std::size_t b) {
        const V3 d = s.sep(b, a);  // x_b - x_a
        const double rab = s.dist(a, b);
        const double hk = s.h[k_idx];
        V3 out{};
        if (r.fallback[k_idx]) {
            // grad_a W(|x_a - x_b|, h_k)
            const double g = k.dw_dv(rab / hk, hk) / (hk * rab);
            for (int i = 0; i < 3; ++i) out[i] = -g * d[i];
            return out;
        }
        const double w = k.w(rab / hk, hk);
        const auto& C = r.cinv[k_idx];
        for (int i = 0; i < 3; ++i) {
            out[i] = (C[i * 3 + 0] * d[0] + C[i * 3 + 1] * d[1] + C[i * 3 + 2] * d[2]) * w;
        }
        return out;
    };

    for (std::size_t a = 0; a < n; ++a) {
        const double pa = r.p[a] / (r.omega[a] * r.rho[a] * r.rho[a]);
        double work = 0.0, heat = 0.0, work_mag = 0.0, heat_mag = 0.0;
        for (std::size_t b : nb[a]) {
            if (s.dist(a, b) == 0.0) continue;
            const V3 Aa = grad(a, a, b);
            const V3 Ab = grad(b, a, b);
            const double pb = r.p[b] / (r.omega[b] * r.rho[b] * r.rho[b]);
            V3 vab{}, xab = s.sep(a, b);
            for (int i = 0; i < 3; ++i) vab[i] = s.v[a][i] - s.v[b][i];
            double xv = 0.0;
            for (int i = 0; i < 3; ++i) xv += xab[i] * vab[i];
            const double wab = xv / s.dist(a, b);
            const double vsig = r.c[a] + r.c[b] - 3.0 * wab;
            const double Pi = xv < 0.0 ? -0.5 * prm.alpha * vsig * wab : 0.0;
            double term2 = 0.0, pair_work = 0.0, pair_heat = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double pressure = -s.m[b] * (pa * Aa[i] + pb * Ab[i]);
                const double av = -0.5 * s.m[b] * Pi * (Aa[i] / r.rho[a] + Ab[i] / r.rho[b]);
                r.acc[a][i] += pressure + av;
                term2 += (std::abs(pressure) + std::abs(av)) * (std::abs(pressure) + std::abs(av));
                pair_work += s.m[b] * vab[i] * Aa[i];
                pair_heat -= 0.5 * vab[i] * av;
            }
            work += pair_work;
            heat += pair_heat;
            work_mag += std::abs(pair_work);
            heat_mag += std::abs(pair_heat);
            r.acc_mag[a] += std::sqrt(term2);
        }
        r.dudt[a] = pa * work + heat;
        r.dudt_mag[a] = std::abs(pa) * work_mag + heat_mag;
    }
    return r;
}

/// Jittered cubic lattice of side^3 particles with spacing dx.
inline State jittered_lattice(int side, double dx, double jitter, double h, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    State s;
    for (int k = 0; k < side; ++k) {
        for (int j = 0; j < side; ++j) {
            for (int i = 0; i < side; ++i) {
                s.x.push_back({(i + 0.5 + jitter * u(gen)) * dx, (j + 0.5 + jitter * u(gen)) * dx,
                               (k + 0.5 + jitter * u(gen)) * dx});
                s.v.push_back({0.0, 0.0, 0.0});
                s.h.push_back(h);
                s.m.push_back(dx * dx * dx);
            }
        }
    }
    return s;
}

} // namespace ref
