// Annulus position perturbations and the RMSE / LoS-agreement metrics.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ndtwin/core.hpp"

namespace ndtwin {

/// Perturbation magnitude index: displacements are sampled from the annulus
/// A(eps_k/3, eps_k/2) with eps_k = k * eps_max; k = 0 means no perturbation.
struct PerturbationSpec {
    double k = 0.0;  // in [0, 1]
    double eps_max = 1.0;  // meters
    std::uint64_t seed = 0;
    int samples_per_k = 25;

    double eps_k() const { return k * eps_max; }
};

/// Uniform radius on [eps_k/3, eps_k/2], uniform angle on [0, 2pi).
Vec2 sample_displacement(const PerturbationSpec& spec, std::mt19937_64& rng);

/// Same law expressed through pre-drawn unit variables, so sweeps can pair
/// draws across k (common random numbers).
Vec2 displacement_from_units(double k, double eps_max, double u_radius, double u_angle);

/// Deterministic uniform in [0,1) from a raw 64-bit draw.
inline double unit_uniform(std::mt19937_64& rng) {
    return std::ldexp(static_cast<double>(rng() >> 11), -53);
}

struct RmseResult {
    double rmse_db = 0.0;
    std::size_t used = 0;          // finite pairs
    std::size_t excluded_inf = 0;  // pairs with a -inf sentinel on either side
};

/// RMSE over paired finite samples; pairs with a non-finite value on either
/// side are excluded and counted. Throws ValidationError on length mismatch
/// or empty input.
RmseResult rmse_k(const std::vector<double>& reference, const std::vector<double>& perturbed);

struct EtaResult {
    double eta = 0.0;
    long tp = 0;  // both LoS
    long tn = 0;  // both NLoS
    long ref_only = 0;   // reference LoS, perturbed NLoS
    long pert_only = 0;  // reference NLoS, perturbed LoS
    std::size_t n = 0;
};

/// LoS classification agreement eta = (TP + TN) / N. Throws ValidationError
/// on length mismatch or empty input.
EtaResult eta_k(const std::vector<bool>& reference_los, const std::vector<bool>& perturbed_los);

/// Paired bootstrap 95% CI for mean(b - a); a and b must be equal length.
struct BootstrapCI {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

BootstrapCI bootstrap_mean_diff(const std::vector<double>& a, const std::vector<double>& b,
                                int resamples, std::uint64_t seed);

}  // namespace ndtwin
