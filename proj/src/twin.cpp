#include "ndtwin/twin.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace ndtwin {

const char* to_string(EnvelopeStatus s) {
    switch (s) {
        case EnvelopeStatus::pending: return "pending";
        case EnvelopeStatus::delivered: return "delivered";
        case EnvelopeStatus::stale_discarded: return "stale_discarded";
        case EnvelopeStatus::failed: return "failed";
    }
    return "?";
}

void PredictionEnvelope::mark(EnvelopeStatus s) {
    if (status_ != EnvelopeStatus::pending) return;  // terminal states are final
    status_ = s;
}

EnvelopeStatus deadline_check(const PredictionEnvelope& envelope, std::int64_t completion_us) {
    return completion_us <= envelope.t_target_us ? EnvelopeStatus::delivered
                                                 : EnvelopeStatus::stale_discarded;
}

std::string envelope_json(const PredictionEnvelope& e) {
    nlohmann::json j;
    j["request_id"] = e.request_id;
    j["t_now_us"] = e.t_now_us;
    j["t_target_us"] = e.t_target_us;
    j["completion_us"] = e.completion_us;
    j["trigger_tick"] = e.trigger_tick;
    j["target_tick"] = e.target_tick;
    j["h_ms"] = e.h_ms;
    j["di"] = e.di_level;
    j["status"] = to_string(e.status());
    j["latency"] = {{"tau_m_ms", e.latency.tau_m_ms},     {"tau_w_ms", e.latency.tau_w_ms},
                    {"tau_tp_ms", e.latency.tau_tp_ms},   {"tau_req_ms", e.latency.tau_req_ms},
                    {"tau_rt_ms", e.latency.tau_rt_ms},   {"tau_e2e_ms", e.latency.tau_e2e_ms}};
    auto& links = j["links"] = nlohmann::json::array();
    for (std::size_t i = 0; i < e.raw.size(); ++i) {
        nlohmann::json l;
        l["a"] = e.raw[i].a;
        l["b"] = e.raw[i].b;
        l["rssi_dbm"] = std::isfinite(e.raw[i].rssi_dbm) ? nlohmann::json(e.raw[i].rssi_dbm)
                                                         : nlohmann::json(nullptr);
        const double corr = i < e.corrected.size() ? e.corrected[i].rssi_dbm : e.raw[i].rssi_dbm;
        l["rssi_corrected_dbm"] =
            std::isfinite(corr) ? nlohmann::json(corr) : nlohmann::json(nullptr);
        l["los"] = e.raw[i].los;
        l["n_paths"] = e.raw[i].n_paths;
        l["delay_spread_s"] = e.raw[i].delay_spread_s;
        links.push_back(std::move(l));
    }
    return j.dump();
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

PredictionMsg compute_prediction(const Scene& static_scene, const PredictRequestMsg& req,
                                 double tx_power_dbm, std::uint64_t seed,
                                 const EngineOptions& opts) {
    std::map<std::string, Pose> poses;
    std::map<std::string, std::string> templates;
    for (const auto& p : req.poses) {
        poses[p.entity_id] = Pose(p.position, p.yaw);
        if (!p.tpl.empty()) templates[p.entity_id] = p.tpl;
    }
    const Scene assembled = assemble_scene(static_scene, poses, templates);
    DetailIndexConfig di = di_preset(req.di);
    const PredictLinksResult res =
        predict_links(assembled, req.links, di, tx_power_dbm, seed, opts);

    PredictionMsg msg;
    msg.request_id = req.request_id;
    msg.t_target_us = req.t_target_us;
    msg.tau_rt_ms = res.tau_rt_ms;
    for (const auto& [key, c] : res.links) {
        LinkPrediction lp;
        lp.a = c.a;
        lp.b = c.b;
        lp.rssi_dbm = c.rssi_dbm;
        lp.los = c.los;
        lp.n_paths = static_cast<int>(c.paths.size());
        lp.delay_spread_s = c.delay_spread_s;
        msg.links.push_back(std::move(lp));
    }
    return msg;
}

InProcessEngine::InProcessEngine(Scene static_scene, double tx_power_dbm, std::uint64_t seed,
                                 EngineOptions opts)
    : scene_(std::move(static_scene)), tx_power_dbm_(tx_power_dbm), seed_(seed), opts_(opts) {}

std::optional<BackendResult> InProcessEngine::predict(const PredictRequestMsg& req,
                                                      std::int64_t) {
    BackendResult r;
    r.msg = compute_prediction(scene_, req, tx_power_dbm_, seed_, opts_);
    r.tau_req_ms = 0.0;
    return r;
}

std::optional<BackendResult> MockEngine::predict(const PredictRequestMsg& req, std::int64_t) {
    if (fail_next_ > 0) {
        --fail_next_;
        return std::nullopt;
    }
    clock_.sleep_until_us(clock_.now_us() + static_cast<std::int64_t>(cost_ms_ * 1000.0));
    BackendResult r;
    r.msg.request_id = req.request_id;
    r.msg.t_target_us = req.t_target_us;
    r.msg.tau_rt_ms = cost_ms_;
    for (const auto& [a, b] : req.links) {
        LinkPrediction lp;
        lp.a = a;
        lp.b = b;
        lp.rssi_dbm = rssi_dbm_;
        lp.los = los_;
        lp.n_paths = 1;
        lp.delay_spread_s = 0.0;
        r.msg.links.push_back(std::move(lp));
    }
    r.tau_req_ms = tau_req_ms_;
    return r;
}

UdpEngineBackend::UdpEngineBackend(Endpoint engine, Clock& clock)
    : engine_(engine), clock_(clock) {
    socket_.bind_loopback(0);
}

std::optional<BackendResult> UdpEngineBackend::predict(const PredictRequestMsg& req,
                                                       std::int64_t deadline_us) {
    const std::int64_t sent_us = clock_.now_us();
    if (!socket_.send_to(engine_, serialize(req))) return std::nullopt;
    while (true) {
        const std::int64_t now = clock_.now_us();
        const int budget_ms = static_cast<int>(std::max<std::int64_t>(
            1, (deadline_us - now) / 1000));
        if (now >= deadline_us) return std::nullopt;
        auto dg = socket_.recv(budget_ms);
        if (!dg) return std::nullopt;
        auto msg = parse_message(dg->payload);
        if (!msg || !std::holds_alternative<PredictionMsg>(*msg)) continue;
        auto pred = std::get<PredictionMsg>(*msg);
        if (pred.request_id != req.request_id) continue;  // stale response
        const double rtt_ms = (clock_.now_us() - sent_us) / 1000.0;
        BackendResult r;
        r.tau_req_ms = std::max(0.0, (rtt_ms - pred.tau_rt_ms) / 2.0);
        r.msg = std::move(pred);
        return r;
    }
}

EngineServer::EngineServer(Scene static_scene, double tx_power_dbm, std::uint64_t seed,
                           EngineOptions opts)
    : scene_(std::move(static_scene)), tx_power_dbm_(tx_power_dbm), seed_(seed), opts_(opts) {
    socket_.bind_loopback(0);
    endpoint_ = socket_.local_endpoint();
}

EngineServer::~EngineServer() { stop(); }

void EngineServer::start() {
    stop_ = false;
    thread_ = std::thread([this] { run(); });
}

void EngineServer::stop() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
}

void EngineServer::run() {
    while (!stop_) {
        auto dg = socket_.recv(20);
        if (!dg) continue;
        auto msg = parse_message(dg->payload);
        if (!msg || !std::holds_alternative<PredictRequestMsg>(*msg)) continue;
        const auto& req = std::get<PredictRequestMsg>(*msg);
        try {
            const PredictionMsg out = compute_prediction(scene_, req, tx_power_dbm_, seed_, opts_);
            socket_.send_to(dg->from, serialize(out));
        } catch (const std::exception&) {
            // Malformed request content (unknown template/link): drop; the
            // twin treats the missing response as an engine failure.
        }
    }
}

// ---------------------------------------------------------------------------
// Twin
// ---------------------------------------------------------------------------

Twin::Twin(TwinConfig cfg, Clock& clock, ChannelBackend& backend, ControlSink* sink)
    : cfg_(std::move(cfg)), clock_(clock), backend_(backend), sink_(sink) {
    cfg_.kalman = KalmanModel::constant_velocity(cfg_.dt_pe_ms / 1000.0);
}

std::int64_t Twin::tick_of(std::int64_t t_us) const {
    const double dt_us = cfg_.dt_pe_ms * 1000.0;
    return static_cast<std::int64_t>(std::llround((t_us - cfg_.epoch_us) / dt_us));
}

std::optional<ReportMsg> Twin::ingest_datagram(std::string_view bytes) {
    std::string err;
    auto msg = parse_message(bytes, &err);
    if (!msg || !std::holds_alternative<ReportMsg>(*msg)) {
        std::lock_guard lock(mutex_);
        ++counters_.malformed;
        return std::nullopt;
    }
    const ReportMsg report = std::get<ReportMsg>(*msg);
    if (!ingest_report(report)) return std::nullopt;
    return report;
}

bool Twin::ingest_report(const ReportMsg& report) {
    const std::int64_t now = clock_.now_us();
    std::lock_guard lock(mutex_);
    if (report.t_meas_us > now + static_cast<std::int64_t>(cfg_.skew_bound_ms * 1000.0)) {
        ++counters_.skew_dropped;
        return false;
    }
    EntityTrack& track = tracks_[report.entity_id];
    if (track.seen && report.t_meas_us <= track.last_t_meas_us) {
        ++counters_.late_dropped;
        return false;
    }
    track.seen = true;
    track.last_t_meas_us = report.t_meas_us;
    track.last_tick = tick_of(report.t_meas_us);
    track.last_z = report.position.z();
    track.last_wire_ms =
        std::max(0.0, (now - report.t_meas_us) / 1000.0 - cfg_.tau_m_ms);

    Measurement m;
    m.source = report.entity_id;
    m.timestamp = (report.t_meas_us - cfg_.epoch_us) / 1e6;
    m.position = Vec2(report.position.x(), report.position.y());
    m.yaw = report.yaw;
    batch_.emplace_back(track.last_tick, std::move(m));
    ++counters_.reports;

    // Residuals: match measured RSSI to the prediction that targeted this tick.
    const auto pred_it = pred_by_tick_.find(track.last_tick);
    for (const auto& sample : report.rssi) {
        if (!std::isfinite(sample.dbm)) continue;
        if (pred_it == pred_by_tick_.end()) continue;
        const auto link_it = pred_it->second.find(LinkKey{sample.a, sample.b});
        if (link_it == pred_it->second.end()) continue;
        const auto& [raw, corrected] = link_it->second;
        if (std::isfinite(raw)) {
            auto& hist = residuals_[LinkKey{sample.a, sample.b}];
            hist.push_back(sample.dbm - raw);
            while (hist.size() > cfg_.residual_window) hist.pop_front();
        }
        if (std::isfinite(corrected)) {
            rssi_errors_.push_back(std::abs(sample.dbm - corrected));
        }
    }
    return true;
}

std::optional<PredictionEnvelope> Twin::run_cycle(std::int64_t trigger_tick) {
    std::vector<Measurement> batch;
    std::map<std::string, TrackedEntity> kf;
    std::map<std::string, double> last_z;
    double ego_wire_ms = 0.0;
    {
        std::lock_guard lock(mutex_);
        if (tracks_.empty()) return std::nullopt;
        // Consume only measurements up to the trigger tick; later arrivals
        // stay queued for their own cycle (keeps batch membership
        // deterministic under scheduling jitter).
        std::vector<std::pair<std::int64_t, Measurement>> keep;
        for (auto& [tick, m] : batch_) {
            if (tick <= trigger_tick) {
                batch.push_back(std::move(m));
            } else {
                keep.emplace_back(tick, std::move(m));
            }
        }
        batch_.swap(keep);
        kf = kf_;
        for (const auto& [id, t] : tracks_) last_z[id] = t.last_z;
        const auto ego_it = tracks_.find(cfg_.ego);
        ego_wire_ms = ego_it != tracks_.end() ? ego_it->second.last_wire_ms : 0.0;
    }

    PredictionEnvelope env;
    env.request_id = "r" + std::to_string(seq_++);
    env.t_now_us = clock_.now_us();
    env.t_target_us = env.t_now_us + static_cast<std::int64_t>(cfg_.h_ms * 1000.0);
    env.trigger_tick = trigger_tick;
    env.target_tick =
        trigger_tick + static_cast<std::int64_t>(std::llround(cfg_.h_ms / cfg_.dt_pe_ms));
    env.h_ms = cfg_.h_ms;
    env.di_level = cfg_.di_level;

    const std::int64_t tp_start = clock_.now_us();
    auto [poses, kf_next] = predict_all(kf, batch, cfg_.h_ms / 1000.0, cfg_.kalman);
    env.latency.tau_tp_ms = (clock_.now_us() - tp_start) / 1000.0;
    {
        std::lock_guard lock(mutex_);
        kf_ = kf_next;
    }
    if (poses.empty()) return std::nullopt;

    PredictRequestMsg req;
    req.request_id = env.request_id;
    req.t_target_us = env.t_target_us;
    req.di = cfg_.di_level;
    for (const auto& [id, pp] : poses) {
        PoseEntry e;
        e.entity_id = id;
        const auto tpl_it = cfg_.templates.find(id);
        e.tpl = tpl_it != cfg_.templates.end() ? tpl_it->second : std::string();
        e.position = Vec3(pp.pose.position.x(), pp.pose.position.y(), last_z[id]);
        e.yaw = pp.pose.yaw;
        env.poses_used[id] = Pose(e.position, e.yaw);
        req.poses.push_back(std::move(e));
    }
    req.links = cfg_.links;

    const std::int64_t deadline =
        env.t_target_us + static_cast<std::int64_t>(cfg_.deadline_slack_ms * 1000.0);
    auto res = backend_.predict(req, deadline);
    if (!res) {
        env.completion_us = clock_.now_us();
        env.mark(EnvelopeStatus::failed);
        std::lock_guard lock(mutex_);
        ++counters_.failed;
        history_.push_back(env);
        return env;
    }

    env.latency.tau_m_ms = cfg_.tau_m_ms;
    env.latency.tau_w_ms = ego_wire_ms;
    env.latency.tau_req_ms = res->tau_req_ms;
    env.latency.tau_rt_ms = res->msg.tau_rt_ms;
    env.latency.tau_e2e_ms = env.latency.component_sum_ms();
    env.raw = res->msg.links;

    env.corrected = env.raw;
    std::map<LinkKey, std::pair<double, double>> by_link;
    {
        std::lock_guard lock(mutex_);
        for (auto& lp : env.corrected) {
            const auto it = residuals_.find(LinkKey{lp.a, lp.b});
            if (it != residuals_.end() && std::isfinite(lp.rssi_dbm)) {
                const std::vector<double> hist(it->second.begin(), it->second.end());
                lp.rssi_dbm = apply_bias_correction(lp.rssi_dbm, hist, cfg_.ewma_alpha);
            }
        }
        for (std::size_t i = 0; i < env.raw.size(); ++i) {
            by_link[LinkKey{env.raw[i].a, env.raw[i].b}] = {env.raw[i].rssi_dbm,
                                                            env.corrected[i].rssi_dbm};
        }
        pred_by_tick_[env.target_tick] = std::move(by_link);
        while (pred_by_tick_.size() > 256) pred_by_tick_.erase(pred_by_tick_.begin());
    }

    env.completion_us = clock_.now_us();
    env.mark(deadline_check(env, env.completion_us));

    std::lock_guard lock(mutex_);
    if (env.status() == EnvelopeStatus::delivered) {
        ++counters_.delivered;
        if (sink_) {
            std::set<std::string> involved;
            for (const auto& lp : env.corrected) {
                involved.insert(lp.a);
                involved.insert(lp.b);
            }
            for (const auto& id : involved) {
                ControlMsg cm;
                cm.entity_id = id;
                cm.t_target_us = env.t_target_us;
                cm.t_sent_us = clock_.now_us();
                for (const auto& lp : env.corrected) {
                    if (lp.a == id || lp.b == id) cm.links.push_back(lp);
                }
                sink_->send_control(id, cm);
                ++counters_.control_sent;
            }
        }
    } else {
        ++counters_.stale_discarded;  // actionable content suppressed
    }
    history_.push_back(env);
    return env;
}

TwinCounters Twin::counters() const {
    std::lock_guard lock(mutex_);
    return counters_;
}

std::int64_t Twin::last_tick(const std::string& entity) const {
    std::lock_guard lock(mutex_);
    const auto it = tracks_.find(entity);
    return it != tracks_.end() ? it->second.last_tick : -1;
}

std::size_t Twin::tracked_entities() const {
    std::lock_guard lock(mutex_);
    return tracks_.size();
}

std::vector<double> Twin::rssi_error_samples() const {
    std::lock_guard lock(mutex_);
    return rssi_errors_;
}

std::map<std::string, TrackedEntity> Twin::beliefs_snapshot() const {
    std::lock_guard lock(mutex_);
    return kf_;
}

}  // namespace ndtwin
