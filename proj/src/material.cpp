#include "ndtwin/material.hpp"

#include <algorithm>
#include <cmath>

namespace ndtwin {

FresnelReflection fresnel_reflection(const Material& m, double cos_theta_i) {
    if (m.is_perfect_conductor) return {Complex(-1.0, 0.0), Complex(1.0, 0.0)};
    const double ci = std::clamp(cos_theta_i, 0.0, 1.0);
    const double sin2 = 1.0 - ci * ci;
    const Complex eps = m.eps_r();
    // Principal sqrt keeps Re >= 0; with Im(eps) <= 0 the root has Im <= 0,
    // which decays into the medium under the e^{-jkd} convention.
    const Complex root = std::sqrt(eps - sin2);
    const Complex r_s = (ci - root) / (ci + root);
    const Complex r_p = (eps * ci - root) / (eps * ci + root);
    return {r_s, r_p};
}

FresnelTransmission fresnel_transmission(const Material& m, double cos_theta_i) {
    if (m.is_perfect_conductor) return {0.0, 0.0};
    const FresnelReflection r = fresnel_reflection(m, cos_theta_i);
    return {std::max(0.0, 1.0 - std::norm(r.r_s)), std::max(0.0, 1.0 - std::norm(r.r_p))};
}

}  // namespace ndtwin
