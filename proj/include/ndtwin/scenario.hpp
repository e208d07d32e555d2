// Scenario files: scene reference, entities with trajectories, twin settings.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ndtwin/channel.hpp"
#include "ndtwin/scene.hpp"

namespace ndtwin {

struct TrajectoryPoint {
    double t = 0.0;  // seconds from scenario start
    Pose pose;
};

struct EntitySpec {
    std::string id;
    std::string tpl;  // empty: bare antenna
    bool is_static = true;
    Pose static_pose;
    std::vector<TrajectoryPoint> trajectory;  // time-sorted when non-static
};

struct Scenario {
    std::string name;
    std::string scene_path;  // resolved against the scenario file directory
    Scene scene;
    std::string ego;
    double h_ms = 500.0;
    double dt_pe_ms = 100.0;
    int di = 2;
    double tx_power_dbm = 10.0;
    double duration_s = 30.0;
    double tau_m_ms = 8.9;
    double measurement_noise_sigma_db = 1.0;
    double pose_noise_sigma_m = 0.2;
    bool periodic_trigger = false;  // default: cycle on each ego report
    double periodic_ms = 100.0;
    std::vector<EntitySpec> entities;
    std::vector<LinkKey> links;

    const EntitySpec* entity(const std::string& id) const;
};

/// Parse + validate: scene loads, trajectories sorted, every link endpoint
/// and the ego are declared entities.
Scenario load_scenario(const std::string& path);

/// Piecewise-linear pose at time t (clamped to the trajectory's span).
Pose scenario_pose(const EntitySpec& e, double t);

}  // namespace ndtwin
