#include "sph/kernel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <numbers>

namespace sph {

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

void check_arguments(double v, double h) {
    if (!(v >= 0.0) || !std::isfinite(v) || !(h > 0.0) || !std::isfinite(h)) {
        throw NumericError("kernel: invalid arguments v=" + std::to_string(v) +
                           " h=" + std::to_string(h));
    }
}

double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

// d sinc / dx = (x cos x - sin x) / x^2
double sinc_derivative(double x) {
    if (std::abs(x) < 1e-3) {
        const double x2 = x * x;
        return x * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0);
    }
    return (x * std::cos(x) - std::sin(x)) / (x * x);
}

double power(double base, double n, int int_n) {
    return int_n >= 0 ? int_pow(base, int_n) : std::pow(base, n);
}

int integral_exponent(double n) {
    const double r = std::round(n);
    return (r == n && r >= 0.0 && r <= 9.0) ? static_cast<int>(r) : -1;
}

} // namespace

double sinc_normalization(double n) {
    if (!(n >= 3.0)) throw ConfigError("kernel: exponent must be >= 3, got " + std::to_string(n));
    const int int_n = integral_exponent(n);
    auto integrand = [&](double v) {
        return power(sinc(kHalfPi * v), n, int_n) * v * v;
    };
    double error = 0.0;
    const double integral =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, 2.0, 20, 1e-14,
                                                                      &error);
    if (!std::isfinite(integral) || integral <= 0.0 || error > 1e-10 * integral) {
        throw NumericError("kernel: normalization quadrature did not converge (error " +
                           std::to_string(error) + ")");
    }
    return 1.0 / (4.0 * std::numbers::pi * integral);
}

SincKernel::SincKernel(double exponent)
    : n_(exponent), int_n_(integral_exponent(exponent)), bn_(sinc_normalization(exponent)) {}

double SincKernel::shape(double v) const {
    if (v >= 2.0) return 0.0;
    return power(sinc(kHalfPi * v), n_, int_n_);
}

double SincKernel::shape_derivative(double v) const {
    if (v <= 0.0 || v >= 2.0) return 0.0;
    const double x = kHalfPi * v;
    const double s = sinc(x);
    const int k = int_n_ >= 1 ? int_n_ - 1 : -1;
    return n_ * power(s, n_ - 1.0, k) * sinc_derivative(x) * kHalfPi;
}

double SincKernel::w(double v, double h) const {
    check_arguments(v, h);
    return bn_ / (h * h * h) * shape(v);
}

double SincKernel::dw_dv(double v, double h) const {
    check_arguments(v, h);
    return bn_ / (h * h * h) * shape_derivative(v);
}

KernelTable::KernelTable(const SincKernel& kernel, std::size_t samples)
    : bn_(kernel.normalization()) {
    if (samples < 2) throw ConfigError("kernel table: need at least 2 samples");
    dv_ = 2.0 / static_cast<double>(samples - 1);
    inv_dv_ = 1.0 / dv_;
    w_.resize(samples);
    dw_.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const double v = static_cast<double>(i) * dv_;
        w_[i] = kernel.shape(v);
        dw_[i] = kernel.shape_derivative(v);
    }
    w_.front() = 1.0;
    w_.back() = 0.0;
    dw_.back() = 0.0;
}

double KernelTable::lerp(const std::vector<double>& table, double v) const {
    if (v >= 2.0) return 0.0;
    const double t = v * inv_dv_;
    const auto i = static_cast<std::size_t>(t);
    if (i + 1 >= table.size()) return table.back();
    const double frac = t - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
}

double KernelTable::w(double v, double h) const {
    check_arguments(v, h);
    return bn_ / (h * h * h) * shape(v);
}

double KernelTable::dw_dv(double v, double h) const {
    check_arguments(v, h);
    return bn_ / (h * h * h) * shape_derivative(v);
}

} // namespace sph
