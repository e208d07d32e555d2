#include "ndtwin/sweep.hpp"

#include <cinttypes>
#include <cstdio>

#include <json.hpp>

#include "ndtwin/errors.hpp"

namespace ndtwin {

namespace {

// One channel evaluation of the link with the blocker at `blocker_pose`
// (plus optional displacement of every entity).
struct InstantResult {
    double rssi_dbm;
    bool los;
};

InstantResult evaluate_instant(const SweepScenario& sc, const SweepConfig& cfg,
                               const DetailIndexConfig& di, const Pose& blocker_pose,
                               const Vec2& displacement) {
    std::map<std::string, Pose> poses = sc.static_poses;
    Pose moved = blocker_pose;
    moved.position.x() += displacement.x();
    moved.position.y() += displacement.y();
    poses[sc.blocker_id] = moved;  // heading never perturbed
    if (sc.perturb_all) {
        for (auto& [id, pose] : poses) {
            if (id == sc.blocker_id) continue;
            pose.position.x() += displacement.x();
            pose.position.y() += displacement.y();
        }
    }
    const Scene assembled = assemble_scene(sc.static_scene, poses, sc.templates);
    const PredictLinksResult res =
        predict_links(assembled, {sc.link}, di, cfg.tx_power_dbm, cfg.seed, cfg.engine);
    const auto& c = res.links.at(sc.link);
    return {c.rssi_dbm, c.los};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ull);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

}  // namespace

SweepResult sweep(const SweepScenario& scenario, const SweepConfig& config) {
    if (scenario.trajectory.empty()) throw ValidationError("sweep: empty blocker trajectory");
    for (std::size_t i = 1; i < scenario.trajectory.size(); ++i) {
        if (scenario.trajectory[i].first < scenario.trajectory[i - 1].first) {
            throw ValidationError("sweep: trajectory timestamps must be sorted");
        }
    }
    SweepConfig cfg = config;
    if (cfg.k_grid.empty()) {
        for (int i = 0; i <= 20; ++i) cfg.k_grid.push_back(i * 0.05);
    }
    const DetailIndexConfig di = di_preset(cfg.di_level);
    const std::size_t n_inst = scenario.trajectory.size();
    const int n_samples = std::max(1, cfg.samples_per_k);

    SweepResult result;
    result.scene_hash = scene_hash(scenario.static_scene);
    result.di = cfg.di_level;
    result.seed = cfg.seed;
    result.samples_per_k = n_samples;
    result.instants = n_inst;

    // Reference trace at the true poses.
    std::vector<double> ref_rssi(n_inst);
    std::vector<bool> ref_los(n_inst);
    for (std::size_t i = 0; i < n_inst; ++i) {
        const auto r = evaluate_instant(scenario, cfg, di, scenario.trajectory[i].second,
                                        Vec2::Zero());
        ref_rssi[i] = r.rssi_dbm;
        ref_los[i] = r.los;
    }
    for (std::size_t i = 1; i < n_inst; ++i) {
        if (ref_los[i] != ref_los[i - 1]) result.transition_found = true;
    }

    // Unit draws paired across k: one stream per sample, instants in order.
    std::vector<std::vector<std::pair<double, double>>> units(n_samples);
    for (int s = 0; s < n_samples; ++s) {
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(s) + 1));
        units[s].resize(n_inst);
        for (std::size_t i = 0; i < n_inst; ++i) {
            const double ur = unit_uniform(rng);
            const double ua = unit_uniform(rng);
            units[s][i] = {ur, ua};
        }
    }

    result.rmse_per_sample.resize(cfg.k_grid.size());
    result.eta_per_sample.resize(cfg.k_grid.size());
    for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki) {
        const double k = cfg.k_grid[ki];
        SweepRow row;
        row.k = k;
        double sq_acc = 0.0;
        long used = 0;
        for (int s = 0; s < n_samples; ++s) {
            std::vector<double> pert_rssi(n_inst);
            std::vector<bool> pert_los(n_inst);
            for (std::size_t i = 0; i < n_inst; ++i) {
                const Vec2 e = displacement_from_units(k, cfg.eps_max, units[s][i].first,
                                                       units[s][i].second);
                const auto r =
                    evaluate_instant(scenario, cfg, di, scenario.trajectory[i].second, e);
                pert_rssi[i] = r.rssi_dbm;
                pert_los[i] = r.los;
            }
            const RmseResult rm = rmse_k(ref_rssi, pert_rssi);
            const EtaResult et = eta_k(ref_los, pert_los);
            result.rmse_per_sample[ki].push_back(rm.rmse_db);
            result.eta_per_sample[ki].push_back(et.eta);
            sq_acc += rm.rmse_db * rm.rmse_db * static_cast<double>(rm.used);
            used += static_cast<long>(rm.used);
            row.excluded_inf += static_cast<long>(rm.excluded_inf);
            row.tp += et.tp;
            row.tn += et.tn;
            row.n += static_cast<long>(et.n);
        }
        row.rmse_db = used ? std::sqrt(sq_acc / static_cast<double>(used)) : 0.0;
        row.eta = row.n ? static_cast<double>(row.tp + row.tn) / static_cast<double>(row.n) : 0.0;
        result.rows.push_back(row);
    }
    return result;
}

std::string sweep_csv(const SweepResult& result) {
    std::string out = "k,rmse_db,eta,tp,tn,n,excluded_inf,di,seed,scene_hash\n";
    char line[256];
    for (const auto& r : result.rows) {
        std::snprintf(line, sizeof line,
                      "%.6f,%.6f,%.6f,%ld,%ld,%ld,%ld,%d,%" PRIu64 ",%016" PRIx64 "\n", r.k,
                      r.rmse_db, r.eta, r.tp, r.tn, r.n, r.excluded_inf, result.di, result.seed,
                      result.scene_hash);
        out += line;
    }
    return out;
}

std::string sweep_metadata_json(const SweepScenario& scenario, const SweepConfig& config,
                                const SweepResult& result) {
    nlohmann::json j;
    j["blocker"] = scenario.blocker_id;
    j["link"] = {scenario.link.first, scenario.link.second};
    j["instants"] = result.instants;
    j["samples_per_k"] = result.samples_per_k;
    j["eps_max_m"] = config.eps_max;
    j["di"] = result.di;
    j["seed"] = result.seed;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016" PRIx64, result.scene_hash);
    j["scene_hash"] = hash_hex;
    j["transition_found"] = result.transition_found;
    j["perturb_all"] = scenario.perturb_all;
    j["rssi_mode"] = to_string(config.engine.mode);
    auto& grid = j["k_grid"] = nlohmann::json::array();
    for (const auto& row : result.rows) grid.push_back(row.k);
    return j.dump(2);
}

}  // namespace ndtwin
