#include "ndtwin/wire.hpp"

#include <json.hpp>

namespace ndtwin {

using nlohmann::json;

namespace {

json dbm_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double dbm_from(const json& j) {
    if (j.is_null()) return -std::numeric_limits<double>::infinity();
    return j.get<double>();
}

json link_to_json(const LinkPrediction& lp) {
    return json{{"a", lp.a},
                {"b", lp.b},
                {"rssi_dbm", dbm_or_null(lp.rssi_dbm)},
                {"los", lp.los},
                {"n_paths", lp.n_paths},
                {"delay_spread_s", lp.delay_spread_s}};
}

LinkPrediction link_from_json(const json& j) {
    LinkPrediction lp;
    lp.a = j.at("a").get<std::string>();
    lp.b = j.at("b").get<std::string>();
    lp.rssi_dbm = dbm_from(j.at("rssi_dbm"));
    lp.los = j.at("los").get<bool>();
    lp.n_paths = j.at("n_paths").get<int>();
    lp.delay_spread_s = j.at("delay_spread_s").get<double>();
    return lp;
}

}  // namespace

std::optional<WireMessage> parse_message(std::string_view bytes, std::string* error) {
    auto fail = [error](const std::string& why) -> std::optional<WireMessage> {
        if (error) *error = why;
        return std::nullopt;
    };
    if (bytes.size() > kMaxDatagramBytes) return fail("datagram exceeds 64 KiB");
    json j = json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return fail("not a JSON object");
    try {
        const std::string type = j.at("type").get<std::string>();
        if (type == "report") {
            ReportMsg m;
            m.entity_id = j.at("entity_id").get<std::string>();
            m.t_meas_us = j.at("t_meas_us").get<std::int64_t>();
            const json& p = j.at("pose");
            m.position = Vec3(p.at("x").get<double>(), p.at("y").get<double>(),
                              p.at("z").get<double>());
            m.yaw = p.at("yaw").get<double>();
            m.speed = j.at("speed").get<double>();
            for (const auto& r : j.value("rssi", json::array())) {
                RssiSample s;
                s.a = r.at("link").at(0).get<std::string>();
                s.b = r.at("link").at(1).get<std::string>();
                s.dbm = dbm_from(r.at("dbm"));
                m.rssi.push_back(std::move(s));
            }
            return m;
        }
        if (type == "predict") {
            PredictRequestMsg m;
            m.request_id = j.at("request_id").get<std::string>();
            m.t_target_us = j.at("t_target_us").get<std::int64_t>();
            m.di = j.at("di").get<int>();
            for (const auto& p : j.at("poses")) {
                PoseEntry e;
                e.entity_id = p.at("entity_id").get<std::string>();
                e.tpl = p.value("template", std::string());
                e.position = Vec3(p.at("x").get<double>(), p.at("y").get<double>(),
                                  p.at("z").get<double>());
                e.yaw = p.at("yaw").get<double>();
                m.poses.push_back(std::move(e));
            }
            for (const auto& l : j.at("links")) {
                m.links.emplace_back(l.at(0).get<std::string>(), l.at(1).get<std::string>());
            }
            return m;
        }
        if (type == "prediction") {
            PredictionMsg m;
            m.request_id = j.at("request_id").get<std::string>();
            m.t_target_us = j.at("t_target_us").get<std::int64_t>();
            for (const auto& l : j.at("links")) m.links.push_back(link_from_json(l));
            m.tau_rt_ms = j.at("tau_rt_ms").get<double>();
            return m;
        }
        if (type == "control") {
            ControlMsg m;
            m.entity_id = j.at("entity_id").get<std::string>();
            m.t_target_us = j.at("t_target_us").get<std::int64_t>();
            m.t_sent_us = j.value("t_sent_us", std::int64_t{0});
            for (const auto& l : j.at("links")) m.links.push_back(link_from_json(l));
            return m;
        }
        return fail("unknown message type \"" + type + "\"");
    } catch (const json::exception& e) {
        return fail(e.what());
    }
}

std::string serialize(const ReportMsg& m) {
    json j;
    j["type"] = "report";
    j["entity_id"] = m.entity_id;
    j["t_meas_us"] = m.t_meas_us;
    j["pose"] = {{"x", m.position.x()}, {"y", m.position.y()}, {"z", m.position.z()},
                 {"yaw", m.yaw}};
    j["speed"] = m.speed;
    auto& arr = j["rssi"] = json::array();
    for (const auto& s : m.rssi) {
        arr.push_back(json{{"link", {s.a, s.b}}, {"dbm", dbm_or_null(s.dbm)}});
    }
    return j.dump();
}

std::string serialize(const PredictRequestMsg& m) {
    json j;
    j["type"] = "predict";
    j["request_id"] = m.request_id;
    j["t_target_us"] = m.t_target_us;
    j["di"] = m.di;
    auto& poses = j["poses"] = json::array();
    for (const auto& p : m.poses) {
        json e{{"entity_id", p.entity_id}, {"x", p.position.x()}, {"y", p.position.y()},
               {"z", p.position.z()}, {"yaw", p.yaw}};
        if (!p.tpl.empty()) e["template"] = p.tpl;
        poses.push_back(std::move(e));
    }
    auto& links = j["links"] = json::array();
    for (const auto& [a, b] : m.links) links.push_back({a, b});
    return j.dump();
}

std::string serialize(const PredictionMsg& m) {
    json j;
    j["type"] = "prediction";
    j["request_id"] = m.request_id;
    j["t_target_us"] = m.t_target_us;
    auto& links = j["links"] = json::array();
    for (const auto& l : m.links) links.push_back(link_to_json(l));
    j["tau_rt_ms"] = m.tau_rt_ms;
    return j.dump();
}

std::string serialize(const ControlMsg& m) {
    json j;
    j["type"] = "control";
    j["entity_id"] = m.entity_id;
    j["t_target_us"] = m.t_target_us;
    j["t_sent_us"] = m.t_sent_us;
    auto& links = j["links"] = json::array();
    for (const auto& l : m.links) links.push_back(link_to_json(l));
    return j.dump();
}

}  // namespace ndtwin
