// UDP/JSON wire schemas: one UTF-8 JSON object per datagram.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ndtwin/channel.hpp"
#include "ndtwin/geometry.hpp"

namespace ndtwin {

inline constexpr std::size_t kMaxDatagramBytes = 64 * 1024;

struct RssiSample {
    std::string a, b;
    double dbm = 0.0;
};

/// {"type":"report", ...} — periodic entity state report.
struct ReportMsg {
    std::string entity_id;
    std::int64_t t_meas_us = 0;
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;
    double speed = 0.0;
    std::vector<RssiSample> rssi;
};

struct PoseEntry {
    std::string entity_id;
    std::string tpl;  // empty: bare antenna
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;
};

/// {"type":"predict", ...} — twin -> engine request for time t_target.
struct PredictRequestMsg {
    std::string request_id;
    std::int64_t t_target_us = 0;
    int di = 1;
    std::vector<PoseEntry> poses;
    std::vector<LinkKey> links;
};

struct LinkPrediction {
    std::string a, b;
    double rssi_dbm = -std::numeric_limits<double>::infinity();  // null on the wire when -inf
    bool los = false;
    int n_paths = 0;
    double delay_spread_s = 0.0;
};

/// {"type":"prediction", ...} — engine -> twin response.
struct PredictionMsg {
    std::string request_id;
    std::int64_t t_target_us = 0;
    std::vector<LinkPrediction> links;
    double tau_rt_ms = 0.0;
};

/// {"type":"control", ...} — twin -> entity predicted link state.
struct ControlMsg {
    std::string entity_id;
    std::int64_t t_target_us = 0;
    std::int64_t t_sent_us = 0;
    std::vector<LinkPrediction> links;
};

using WireMessage = std::variant<ReportMsg, PredictRequestMsg, PredictionMsg, ControlMsg>;

/// Parse one datagram; nullopt on malformed input (oversized, bad JSON,
/// unknown type, missing fields), with the reason in *error when given.
std::optional<WireMessage> parse_message(std::string_view bytes, std::string* error = nullptr);

std::string serialize(const ReportMsg& m);
std::string serialize(const PredictRequestMsg& m);
std::string serialize(const PredictionMsg& m);
std::string serialize(const ControlMsg& m);

}  // namespace ndtwin
