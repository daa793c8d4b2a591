#pragma once

#include "sph/common.hpp"

#include <vector>

namespace sph {

/// x^k by repeated multiplication for 0 <= k <= 9, std::pow otherwise.
constexpr double int_pow(double x, int k) {
    switch (k) {
    case 0: return 1.0;
    case 1: return x;
    case 2: return x * x;
    case 3: return x * x * x;
    case 4: { const double x2 = x * x; return x2 * x2; }
    case 5: { const double x2 = x * x; return x2 * x2 * x; }
    case 6: { const double x3 = x * x * x; return x3 * x3; }
    case 7: { const double x3 = x * x * x; return x3 * x3 * x; }
    case 8: { const double x2 = x * x; const double x4 = x2 * x2; return x4 * x4; }
    case 9: { const double x3 = x * x * x; return x3 * x3 * x3; }
    default: return std::pow(x, k);
    }
}

/// Normalization B_n so that 4*pi * int_0^2 [sinc(pi v / 2)]^n v^2 dv * B_n = 1
/// (3D, h = 1). Throws NumericError if the quadrature misses 1e-10.
double sinc_normalization(double n);

/// Sinc kernel family W(v, h) = B_n / h^3 * [sinc(pi v / 2)]^n on [0, 2].
class SincKernel {
public:
    explicit SincKernel(double exponent = 6.0);

    double exponent() const { return n_; }
    double normalization() const { return bn_; }

    /// Shape S_n(pi v / 2) without the B_n / h^3 prefactor; 0 for v >= 2.
    double shape(double v) const;
    /// dS_n(pi v / 2)/dv; 0 at v = 0 and for v >= 2.
    double shape_derivative(double v) const;

    double w(double v, double h) const;
    double dw_dv(double v, double h) const;

private:
    double n_;
    int int_n_;  // n when integral, else -1
    double bn_;
};

/// Sampled S_n and dS_n/dv on v in [0, 2] with linear interpolation.
/// One table serves every h: the B_n / h^3 factor is applied outside.
class KernelTable {
public:
    static constexpr std::size_t kDefaultSize = 20000;

    explicit KernelTable(const SincKernel& kernel, std::size_t samples = kDefaultSize);

    std::size_t size() const { return w_.size(); }
    double spacing() const { return dv_; }
    double sample(std::size_t i) const { return w_[i]; }
    double derivative_sample(std::size_t i) const { return dw_[i]; }

    double shape(double v) const { return lerp(w_, v); }
    double shape_derivative(double v) const { return lerp(dw_, v); }

    double w(double v, double h) const;
    double dw_dv(double v, double h) const;

private:
    double lerp(const std::vector<double>& table, double v) const;

    double bn_;
    double dv_;
    double inv_dv_;
    std::vector<double> w_;
    std::vector<double> dw_;
};

/// Kernel access used by the physics passes: direct evaluation, or the
/// table fast path when a table is attached.
class KernelEvaluator {
public:
    explicit KernelEvaluator(const SincKernel& kernel, const KernelTable* table = nullptr)
        : kernel_(&kernel), table_(table) {}

    const SincKernel& kernel() const { return *kernel_; }
    bool uses_table() const { return table_ != nullptr; }

    double w(double v, double h) const { return table_ ? table_->w(v, h) : kernel_->w(v, h); }
    double dw_dv(double v, double h) const {
        return table_ ? table_->dw_dv(v, h) : kernel_->dw_dv(v, h);
    }
    /// dW/dh at fixed separation: -(3 W + v dW/dv) / h.
    double dw_dh(double v, double h) const { return -(3.0 * w(v, h) + v * dw_dv(v, h)) / h; }

private:
    const SincKernel* kernel_;
    const KernelTable* table_;
};

} // namespace sph
