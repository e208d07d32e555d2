#include "ndtwin/perturbation.hpp"

#include <algorithm>
#include <cmath>

#include "ndtwin/errors.hpp"

namespace ndtwin {

Vec2 displacement_from_units(double k, double eps_max, double u_radius, double u_angle) {
    if (k <= 0.0) return Vec2::Zero();
    const double eps_k = k * eps_max;
    const double r = eps_k / 3.0 + u_radius * (eps_k / 2.0 - eps_k / 3.0);
    const double theta = 2.0 * kPi * u_angle;
    return Vec2(r * std::cos(theta), r * std::sin(theta));
}

Vec2 sample_displacement(const PerturbationSpec& spec, std::mt19937_64& rng) {
    if (spec.k <= 0.0) return Vec2::Zero();
    const double u_r = unit_uniform(rng);
    const double u_a = unit_uniform(rng);
    return displacement_from_units(spec.k, spec.eps_max, u_r, u_a);
}

RmseResult rmse_k(const std::vector<double>& reference, const std::vector<double>& perturbed) {
    if (reference.size() != perturbed.size()) {
        throw ValidationError("rmse_k: trace length mismatch");
    }
    if (reference.empty()) throw ValidationError("rmse_k: empty traces");
    RmseResult out;
    double acc = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (!std::isfinite(reference[i]) || !std::isfinite(perturbed[i])) {
            ++out.excluded_inf;
            continue;
        }
        const double d = perturbed[i] - reference[i];
        acc += d * d;
        ++out.used;
    }
    out.rmse_db = out.used ? std::sqrt(acc / static_cast<double>(out.used)) : 0.0;
    return out;
}

EtaResult eta_k(const std::vector<bool>& reference_los, const std::vector<bool>& perturbed_los) {
    if (reference_los.size() != perturbed_los.size()) {
        throw ValidationError("eta_k: trace length mismatch");
    }
    if (reference_los.empty()) throw ValidationError("eta_k: empty traces");
    EtaResult out;
    out.n = reference_los.size();
    for (std::size_t i = 0; i < out.n; ++i) {
        if (reference_los[i] && perturbed_los[i]) ++out.tp;
        else if (!reference_los[i] && !perturbed_los[i]) ++out.tn;
        else if (reference_los[i]) ++out.ref_only;
        else ++out.pert_only;
    }
    out.eta = static_cast<double>(out.tp + out.tn) / static_cast<double>(out.n);
    return out;
}

BootstrapCI bootstrap_mean_diff(const std::vector<double>& a, const std::vector<double>& b,
                                int resamples, std::uint64_t seed) {
    if (a.size() != b.size() || a.empty()) {
        throw ValidationError("bootstrap_mean_diff: length mismatch or empty");
    }
    const std::size_t n = a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = b[i] - a[i];

    BootstrapCI ci;
    for (double d : diff) ci.mean += d;
    ci.mean /= static_cast<double>(n);

    std::mt19937_64 rng(seed);
    std::vector<double> means;
    means.reserve(resamples);
    for (int r = 0; r < resamples; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += diff[rng() % n];
        means.push_back(acc / static_cast<double>(n));
    }
    std::sort(means.begin(), means.end());
    const auto at = [&](double q) {
        std::size_t idx = static_cast<std::size_t>(q * (means.size() - 1));
        return means[idx];
    };
    ci.lo = at(0.025);
    ci.hi = at(0.975);
    return ci;
}

}  // namespace ndtwin
