// Offline perturbation study: annulus-displaced blocker positions, re-run
// channel prediction, aggregate RMSE_k and eta_k per perturbation index.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndtwin/channel.hpp"
#include "ndtwin/perturbation.hpp"
#include "ndtwin/scene.hpp"

namespace ndtwin {

struct SweepScenario {
    Scene static_scene;
    std::map<std::string, Pose> static_poses;      // link endpoints and other fixed entities
    std::map<std::string, std::string> templates;  // per-entity template name ("" = bare)
    std::string blocker_id;                        // the perturbed entity
    std::vector<std::pair<double, Pose>> trajectory;  // (t, blocker pose) evaluation instants
    LinkKey link;
    bool perturb_all = false;  // also displace the static entities
};

struct SweepConfig {
    std::vector<double> k_grid;  // defaults to 0..1 step 0.05 when empty
    double eps_max = 1.0;
    int samples_per_k = 25;
    std::uint64_t seed = 0;
    int di_level = 2;
    double tx_power_dbm = 10.0;
    EngineOptions engine;
};

struct SweepRow {
    double k = 0.0;
    double rmse_db = 0.0;
    double eta = 0.0;
    long tp = 0;
    long tn = 0;
    long n = 0;
    long excluded_inf = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // ordered by k
    std::uint64_t scene_hash = 0;
    int di = 0;
    std::uint64_t seed = 0;
    int samples_per_k = 0;
    std::size_t instants = 0;
    bool transition_found = false;  // reference trace crosses LoS<->NLoS
    // Per-sample aggregates for paired bootstrap checks: [k index][sample].
    std::vector<std::vector<double>> rmse_per_sample;
    std::vector<std::vector<double>> eta_per_sample;
};

/// Deterministic per (scenario, config seed); draws are paired across k.
SweepResult sweep(const SweepScenario& scenario, const SweepConfig& config);

/// CSV: k,rmse_db,eta,tp,tn,n,excluded_inf,di,seed,scene_hash (one row per k).
std::string sweep_csv(const SweepResult& result);

/// Companion metadata documenting the defaults the study ran with.
std::string sweep_metadata_json(const SweepScenario& scenario, const SweepConfig& config,
                                const SweepResult& result);

}  // namespace ndtwin
