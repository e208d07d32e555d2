// Electromagnetic material parameters and Fresnel coefficients.
#pragma once

#include <string>

#include "ndtwin/core.hpp"

namespace ndtwin {

/// Material table entry. Complex relative permittivity uses the e^{-jkd}
/// phase convention, so lossy media carry a non-positive imaginary part.
struct Material {
    std::string name;
    double eps_r_real = 1.0;
    double eps_r_imag = 0.0;  // <= 0 for lossy media
    bool is_perfect_conductor = false;
    double scattering_coefficient = 0.0;  // in [0, 1]

    Complex eps_r() const { return {eps_r_real, eps_r_imag}; }
};

/// Fresnel reflection coefficients at a planar interface from air into the
/// material, for incidence angle cos_theta_i = cos of the angle from the
/// surface normal. Perpendicular (s) and parallel (p) polarizations.
/// PEC: r_s = -1, r_p = +1.
struct FresnelReflection {
    Complex r_s;
    Complex r_p;
};

FresnelReflection fresnel_reflection(const Material& m, double cos_theta_i);

/// Thin-sheet amplitude transmission, per polarization: 1 - |r|^2 (real,
/// passive); 0 for perfect conductors.
struct FresnelTransmission {
    double t_s;
    double t_p;
};

FresnelTransmission fresnel_transmission(const Material& m, double cos_theta_i);

}  // namespace ndtwin
