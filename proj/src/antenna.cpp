#include "ndtwin/antenna.hpp"

#include <cmath>

namespace ndtwin {

void spherical_basis(const Vec3& dir, Vec3& theta_hat, Vec3& phi_hat) {
    const double rho = std::hypot(dir.x(), dir.y());
    if (rho < 1e-12) {
        // Pole: pick a fixed tangent frame.
        theta_hat = dir.z() > 0 ? Vec3(Vec3::UnitX()) : Vec3(-Vec3::UnitX());
        phi_hat = Vec3::UnitY();
        return;
    }
    const double cos_theta = dir.z();
    const double cos_phi = dir.x() / rho;
    const double sin_phi = dir.y() / rho;
    theta_hat = Vec3(cos_theta * cos_phi, cos_theta * sin_phi, -rho);
    phi_hat = Vec3(-sin_phi, cos_phi, 0.0);
}

double AntennaPattern::peak_gain() const {
    if (kind == PatternKind::isotropic) return 1.0;
    return 2.0 * (exponent + 1.0);
}

Vec2c AntennaPattern::pattern(const Vec3& direction) const {
    double amp = 1.0;
    if (kind == PatternKind::directive) {
        const double c = boresight.normalized().dot(direction);
        amp = c > 0.0 ? std::sqrt(2.0 * (exponent + 1.0)) * std::pow(c, exponent) : 0.0;
    }
    // Vertical polarization: theta-hat component only.
    return Vec2c(Complex(amp, 0.0), Complex(0.0, 0.0));
}

}  // namespace ndtwin
