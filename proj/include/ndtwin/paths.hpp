// Validated propagation paths and their per-interaction Jones matrices.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndtwin/core.hpp"

namespace ndtwin {

enum class InteractionKind { specular, diffuse, transmission, diffraction };

const char* to_string(InteractionKind k);

/// One surface interaction. The Jones matrix folds the polarization-basis
/// rotations between consecutive segment frames, so the ordered product of a
/// path's matrices maps the departure spherical basis onto the arrival one.
/// Spectral norm <= 1 (passive).
struct Interaction {
    InteractionKind kind = InteractionKind::specular;
    Vec3 point = Vec3::Zero();
    std::uint32_t patch = 0;
    Mat2c jones = Mat2c::Identity();
};

struct PropagationPath {
    std::string a, b;       // link endpoints
    double length = 0.0;    // d_p, meters; >= straight-line TX-RX distance
    double delay = 0.0;     // tau_p = d_p / c, seconds
    Vec3 dep_dir = Vec3::UnitX();  // from TX toward the first vertex
    Vec3 arr_dir = Vec3::UnitX();  // from RX back toward the last vertex
    double theta_t = 0.0, phi_t = 0.0;  // departure angles, rad
    double theta_r = 0.0, phi_r = 0.0;  // arrival angles, rad
    std::vector<Interaction> interactions;
    Complex gain{0.0, 0.0};  // g_p, filled by eval_path_gain
};

}  // namespace ndtwin
