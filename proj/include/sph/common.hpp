#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sph {

using Vec3 = std::array<double, 3>;

/// Failure of a numerical invariant (non-finite update, degenerate density,
/// quadrature divergence). Maps to exit code 1 in the driver.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input or configuration. Maps to exit code 2 in the driver.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken internal contract between modules (e.g. a halo message sent to a
/// rank that shares no boundary with the sender).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Optional periodicity along z. x and y are always open.
struct PeriodicZ {
    bool enabled = false;
    double lo = 0.0;
    double hi = 0.0;

    double period() const { return hi - lo; }

    /// Minimum-image correction of a z separation.
    double min_image(double dz) const {
        if (!enabled) return dz;
        const double p = period();
        if (dz > 0.5 * p) return dz - p;
        if (dz < -0.5 * p) return dz + p;
        return dz;
    }

    /// Wraps a coordinate into [lo, hi).
    double wrap(double z) const {
        if (!enabled) return z;
        const double p = period();
        if (z >= lo && z < hi) return z;
        double w = z - p * std::floor((z - lo) / p);
        if (w >= hi) w -= p;
        return w;
    }
};

} // namespace sph
