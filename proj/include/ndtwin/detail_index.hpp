// Fidelity tiers of the ray-based channel model.
#pragma once

#include <cstdint>

namespace ndtwin {

/// One fidelity tier: ray budget, interaction depth, enabled mechanisms.
/// Nominal ray counts of the high tiers are infeasible at desk scale; the
/// engine launches min(rays_per_source, effective cap) and reports both.
struct DetailIndexConfig {
    int level = 1;                 // 1..5 for presets, 0 for custom
    int max_interactions = 3;
    double rays_per_source = 1e3;  // nominal, for reporting
    bool enable_los = true;
    bool enable_specular = false;
    bool enable_diffuse = false;
    bool enable_refraction = false;
    bool enable_diffraction = false;
};

/// Built-in presets DI1..DI5. Throws std::invalid_argument outside 1..5.
DetailIndexConfig di_preset(int level);

}  // namespace ndtwin
