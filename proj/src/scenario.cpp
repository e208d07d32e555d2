#include "ndtwin/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ndtwin/errors.hpp"

namespace ndtwin {

using nlohmann::json;

const EntitySpec* Scenario::entity(const std::string& id) const {
    for (const auto& e : entities) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

namespace {

Pose parse_pose(const json& j) {
    return Pose(Vec3(j.at("x").get<double>(), j.at("y").get<double>(), j.value("z", 0.0)),
                j.value("yaw", 0.0));
}

}  // namespace

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file \"" + path + "\"");
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }

    Scenario sc;
    try {
        sc.name = j.value("name", std::filesystem::path(path).stem().string());
        sc.scene_path = j.at("scene").get<std::string>();
        sc.ego = j.at("ego").get<std::string>();
        sc.h_ms = j.value("h_ms", 500.0);
        sc.dt_pe_ms = j.value("dt_pe_ms", 100.0);
        sc.di = j.value("di", 2);
        sc.tx_power_dbm = j.value("tx_power_dbm", 10.0);
        sc.duration_s = j.value("duration_s", 30.0);
        sc.tau_m_ms = j.value("tau_m_ms", 8.9);
        sc.measurement_noise_sigma_db = j.value("measurement_noise_sigma_db", 1.0);
        sc.pose_noise_sigma_m = j.value("pose_noise_sigma_m", 0.2);
        const std::string trigger = j.value("trigger", std::string("on_report"));
        if (trigger != "on_report" && trigger != "periodic") {
            throw ValidationError("trigger must be \"on_report\" or \"periodic\"");
        }
        sc.periodic_trigger = trigger == "periodic";
        sc.periodic_ms = j.value("periodic_ms", sc.dt_pe_ms);

        for (const auto& je : j.at("entities")) {
            EntitySpec e;
            e.id = je.at("id").get<std::string>();
            e.tpl = je.value("template", std::string());
            if (je.contains("trajectory")) {
                e.is_static = false;
                for (const auto& jp : je.at("trajectory")) {
                    TrajectoryPoint p;
                    p.t = jp.at("t").get<double>();
                    p.pose = parse_pose(jp);
                    e.trajectory.push_back(p);
                }
                if (e.trajectory.empty()) {
                    throw ValidationError("entity \"" + e.id + "\": empty trajectory");
                }
                if (!std::is_sorted(e.trajectory.begin(), e.trajectory.end(),
                                    [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
                                        return a.t < b.t;
                                    })) {
                    throw ValidationError("entity \"" + e.id +
                                          "\": trajectory timestamps must be sorted");
                }
            } else {
                e.static_pose = parse_pose(je.at("pose"));
            }
            sc.entities.push_back(std::move(e));
        }
        for (const auto& jl : j.at("links")) {
            sc.links.emplace_back(jl.at(0).get<std::string>(), jl.at(1).get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }

    if (!sc.entity(sc.ego)) {
        throw ValidationError("ego entity \"" + sc.ego + "\" is not declared");
    }
    for (const auto& [a, b] : sc.links) {
        if (!sc.entity(a)) throw ValidationError("link endpoint \"" + a + "\" is not declared");
        if (!sc.entity(b)) throw ValidationError("link endpoint \"" + b + "\" is not declared");
    }

    std::filesystem::path scene_file(sc.scene_path);
    if (scene_file.is_relative()) {
        scene_file = std::filesystem::path(path).parent_path() / scene_file;
    }
    sc.scene_path = scene_file.string();
    sc.scene = load_scene(sc.scene_path);
    for (const auto& e : sc.entities) {
        if (!e.tpl.empty() && !sc.scene.vehicle_templates.count(e.tpl)) {
            throw ValidationError("entity \"" + e.id + "\" uses unknown template \"" + e.tpl +
                                  "\"");
        }
    }
    return sc;
}

Pose scenario_pose(const EntitySpec& e, double t) {
    if (e.is_static) return e.static_pose;
    const auto& tr = e.trajectory;
    if (t <= tr.front().t) return tr.front().pose;
    if (t >= tr.back().t) return tr.back().pose;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        if (t <= tr[i].t) {
            const auto& p0 = tr[i - 1];
            const auto& p1 = tr[i];
            const double span = p1.t - p0.t;
            const double f = span > 0 ? (t - p0.t) / span : 0.0;
            Pose out;
            out.position = (1.0 - f) * p0.pose.position + f * p1.pose.position;
            const double dyaw = wrap_angle(p1.pose.yaw - p0.pose.yaw);
            out.yaw = wrap_angle(p0.pose.yaw + f * dyaw);
            return out;
        }
    }
    return tr.back().pose;
}

}  // namespace ndtwin
