// Antenna pattern vectors (Eq.-2-style complex patterns, vertical polarization).
#pragma once

#include "ndtwin/core.hpp"

namespace ndtwin {

enum class PatternKind { isotropic, directive };

/// Vertically polarized antenna. The pattern vector is expressed in the local
/// spherical basis (theta-hat, phi-hat) of the query direction; isotropic
/// patterns have |c| = 1 everywhere, directive ones peak at sqrt(2(n+1))
/// along the boresight with a cos^n falloff (zero in the back hemisphere).
struct AntennaPattern {
    PatternKind kind = PatternKind::isotropic;
    Vec3 boresight = Vec3::UnitX();
    double exponent = 0.0;  // >= 0, only used by directive patterns

    double peak_gain() const;  // max |c|^2

    /// Pattern vector for a propagation direction away from the antenna
    /// (departure: toward the first interaction; arrival: toward the last).
    Vec2c pattern(const Vec3& direction) const;
};

/// Spherical basis (theta-hat, phi-hat) for a unit direction; theta measured
/// from +z. Degenerate at the poles, where x-hat/y-hat are substituted.
void spherical_basis(const Vec3& dir, Vec3& theta_hat, Vec3& phi_hat);

}  // namespace ndtwin
