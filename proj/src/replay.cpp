#include "ndtwin/replay.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "ndtwin/errors.hpp"
#include "ndtwin/twin.hpp"

namespace ndtwin {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

double gaussian(std::mt19937_64& rng) {
    // Box-Muller on deterministic uniforms.
    double u1 = std::ldexp(static_cast<double>(rng() >> 11), -53);
    double u2 = std::ldexp(static_cast<double>(rng() >> 11), -53);
    u1 = std::max(u1, 1e-16);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

struct UdpControlSink final : ControlSink {
    UdpSocket socket;
    std::map<std::string, Endpoint>* endpoints;
    std::uint64_t sent = 0;

    explicit UdpControlSink(std::map<std::string, Endpoint>* eps) : endpoints(eps) {}
    void send_control(const std::string& entity_id, const ControlMsg& msg) override {
        const auto it = endpoints->find(entity_id);
        if (it == endpoints->end()) return;
        if (socket.send_to(it->second, serialize(msg))) ++sent;
    }
};

}  // namespace

RunReport run_replay(const Scenario& scenario, const ReplayOptions& options) {
    const double duration_s = options.duration_s.value_or(scenario.duration_s);
    const double dt_ms = options.dt_pe_ms.value_or(scenario.dt_pe_ms);
    const double h_ms = options.h_ms.value_or(scenario.h_ms);
    const int di_level = options.di.value_or(scenario.di);
    const std::int64_t dt_us = static_cast<std::int64_t>(dt_ms * 1000.0);
    const std::int64_t n_ticks = static_cast<std::int64_t>(duration_s * 1000.0 / dt_ms);

    EngineOptions engine_opts;
    engine_opts.rays_cap = options.rays_cap;
    engine_opts.mode = options.mode;

    // --- Deterministic ground truth tables -------------------------------
    const std::size_t n_entities = scenario.entities.size();
    std::vector<std::vector<Pose>> true_pose(n_ticks, std::vector<Pose>(n_entities));
    std::vector<std::vector<double>> speed(n_ticks, std::vector<double>(n_entities, 0.0));
    for (std::int64_t k = 0; k < n_ticks; ++k) {
        const double t = k * dt_ms / 1000.0;
        for (std::size_t e = 0; e < n_entities; ++e) {
            true_pose[k][e] = scenario_pose(scenario.entities[e], t);
            const Pose before = scenario_pose(scenario.entities[e], std::max(0.0, t - 0.05));
            const Pose after = scenario_pose(scenario.entities[e], t + 0.05);
            speed[k][e] = (after.position - before.position).norm() / 0.1;
        }
    }

    // Synthesized "measured" RSSI: ground-truth channel at the true poses
    // plus Gaussian noise.
    std::map<LinkKey, std::vector<double>> measured_rssi;
    {
        std::map<std::string, std::string> templates;
        for (const auto& e : scenario.entities) {
            if (!e.tpl.empty()) templates[e.id] = e.tpl;
        }
        std::mt19937_64 noise_rng(mix64(options.seed ^ 0x6d656173ull));
        for (std::int64_t k = 0; k < n_ticks; ++k) {
            std::map<std::string, Pose> poses;
            for (std::size_t e = 0; e < n_entities; ++e) {
                poses[scenario.entities[e].id] = true_pose[k][e];
            }
            const Scene assembled = assemble_scene(scenario.scene, poses, templates);
            const auto res = predict_links(assembled, scenario.links, di_preset(di_level),
                                           scenario.tx_power_dbm, options.seed, engine_opts);
            for (const auto& [key, c] : res.links) {
                double v = c.rssi_dbm;
                if (std::isfinite(v)) {
                    v += scenario.measurement_noise_sigma_db * gaussian(noise_rng);
                }
                measured_rssi[key].push_back(v);
            }
        }
    }

    // Measured (noisy) entity poses per tick.
    std::vector<std::vector<Pose>> meas_pose = true_pose;
    for (std::size_t e = 0; e < n_entities; ++e) {
        std::mt19937_64 rng(mix64(options.seed ^ (0x706f7365ull + e)));
        for (std::int64_t k = 0; k < n_ticks; ++k) {
            meas_pose[k][e].position.x() += scenario.pose_noise_sigma_m * gaussian(rng);
            meas_pose[k][e].position.y() += scenario.pose_noise_sigma_m * gaussian(rng);
        }
    }

    // Report loss injection (deterministic per seed).
    std::vector<std::vector<bool>> dropped(n_ticks, std::vector<bool>(n_entities, false));
    if (options.drop_rate > 0.0) {
        std::mt19937_64 rng(mix64(options.seed ^ 0x64726f70ull));
        for (std::int64_t k = 0; k < n_ticks; ++k) {
            for (std::size_t e = 0; e < n_entities; ++e) {
                const double u = std::ldexp(static_cast<double>(rng() >> 11), -53);
                dropped[k][e] = u < options.drop_rate;
            }
        }
    }

    // --- Plumbing ----------------------------------------------------------
    SystemClock clock;
    EngineServer engine(scenario.scene, scenario.tx_power_dbm, options.seed, engine_opts);
    engine.start();

    UdpSocket twin_socket;
    twin_socket.bind_loopback(0);
    const Endpoint twin_ep = twin_socket.local_endpoint();

    UdpEngineBackend backend(engine.endpoint(), clock);
    std::map<std::string, Endpoint> entity_endpoints;
    UdpControlSink sink(&entity_endpoints);

    const std::int64_t epoch = clock.now_us() + 300'000;

    TwinConfig cfg;
    cfg.h_ms = h_ms;
    cfg.dt_pe_ms = dt_ms;
    cfg.di_level = di_level;
    cfg.tx_power_dbm = scenario.tx_power_dbm;
    cfg.links = scenario.links;
    cfg.ego = scenario.ego;
    cfg.tau_m_ms = scenario.tau_m_ms;
    cfg.epoch_us = epoch;
    cfg.mode = options.mode;
    cfg.trigger = scenario.periodic_trigger ? TwinConfig::Trigger::periodic
                                            : TwinConfig::Trigger::on_report;
    cfg.periodic_ms = scenario.periodic_ms;
    for (const auto& e : scenario.entities) cfg.templates[e.id] = e.tpl;
    Twin twin(cfg, clock, backend, &sink);

    // --- Entity simulators ---------------------------------------------------
    // One scheduler thread multiplexes every entity: send order within a tick
    // is fixed (ego last), so the trigger normally sees a complete tick and a
    // slow machine cannot starve one simulator against another.
    std::atomic<std::uint64_t> control_received{0};
    const std::int64_t tau_m_us = static_cast<std::int64_t>(scenario.tau_m_ms * 1000.0);
    std::size_t ego_index = 0;
    for (std::size_t e = 0; e < n_entities; ++e) {
        if (scenario.entities[e].id == scenario.ego) ego_index = e;
    }
    std::vector<std::int64_t> stagger_us(n_entities);
    {
        std::int64_t next = 1'000;
        for (std::size_t e = 0; e < n_entities; ++e) {
            if (e == ego_index) continue;
            stagger_us[e] = next;
            next += 1'000;
        }
        stagger_us[ego_index] = next + 2'000;  // ego reports last
    }
    std::vector<UdpSocket> entity_socks(n_entities);
    for (auto& s : entity_socks) s.bind_loopback(0);

    std::vector<std::size_t> send_order(n_entities);
    std::iota(send_order.begin(), send_order.end(), 0u);
    std::sort(send_order.begin(), send_order.end(),
              [&](std::size_t a, std::size_t b) { return stagger_us[a] < stagger_us[b]; });

    std::thread scheduler([&]() {
        SystemClock eclock;
        for (std::int64_t k = 0; k < n_ticks; ++k) {
            for (const std::size_t e : send_order) {
                const EntitySpec& spec = scenario.entities[e];
                const std::int64_t t_meas = epoch + k * dt_us + stagger_us[e];
                eclock.sleep_until_us(t_meas + tau_m_us);
                for (auto& s : entity_socks) {
                    while (auto dg = s.recv(0)) {
                        auto msg = parse_message(dg->payload);
                        if (msg && std::holds_alternative<ControlMsg>(*msg)) ++control_received;
                    }
                }
                if (dropped[k][e]) continue;
                ReportMsg r;
                r.entity_id = spec.id;
                r.t_meas_us = t_meas;
                r.position = meas_pose[k][e].position;
                r.yaw = meas_pose[k][e].yaw;
                r.speed = speed[k][e];
                for (const auto& link : scenario.links) {
                    if (link.first != spec.id && link.second != spec.id) continue;
                    r.rssi.push_back({link.first, link.second, measured_rssi[link][k]});
                }
                entity_socks[e].send_to(twin_ep, serialize(r));
            }
        }
    });

    // --- Twin loop ------------------------------------------------------------
    const std::int64_t end_us =
        epoch + n_ticks * dt_us + static_cast<std::int64_t>(h_ms * 1000.0) + 300'000;
    const std::int64_t barrier_us = std::min<std::int64_t>(dt_us, 80'000);
    // Ego reports queue cycle triggers FIFO; each waits for its tick's peer
    // reports (or the barrier timeout) before the cycle runs. Cycles execute
    // strictly one at a time.
    std::deque<std::int64_t> triggers;
    std::int64_t last_queued = -1;
    std::int64_t last_period_idx = -1;
    std::int64_t armed_tick = -1;
    std::int64_t barrier_deadline = 0;
    std::vector<std::pair<std::int64_t, PredictionEnvelope>> cycle_log;

    while (clock.now_us() < end_us) {
        auto dg = twin_socket.recv(2);
        if (dg) {
            auto report = twin.ingest_datagram(dg->payload);
            if (report) {
                entity_endpoints[report->entity_id] = dg->from;
                if (!scenario.periodic_trigger && report->entity_id == scenario.ego) {
                    const std::int64_t tick = twin.last_tick(scenario.ego);
                    if (tick > last_queued) {
                        triggers.push_back(tick);
                        last_queued = tick;
                    }
                }
            }
        }
        if (scenario.periodic_trigger) {
            const std::int64_t period_us =
                static_cast<std::int64_t>(scenario.periodic_ms * 1000.0);
            const std::int64_t period_idx = (clock.now_us() - epoch) / period_us;
            // Triggers carry report-grid ticks so cycle batches stay
            // tick-scoped regardless of the period.
            const std::int64_t tick = (clock.now_us() - epoch) / dt_us;
            if (period_idx > last_period_idx && tick > last_queued &&
                twin.tracked_entities() > 0 && clock.now_us() < epoch + n_ticks * dt_us) {
                last_period_idx = period_idx;
                triggers.push_back(tick);
                last_queued = tick;
            }
        }
        while (!triggers.empty()) {
            const std::int64_t tick = triggers.front();
            if (tick != armed_tick) {
                armed_tick = tick;
                barrier_deadline = clock.now_us() + barrier_us;
            }
            bool complete = true;
            for (const auto& e : scenario.entities) {
                if (twin.last_tick(e.id) < tick) complete = false;
            }
            if (!complete && clock.now_us() < barrier_deadline) break;
            auto env = twin.run_cycle(tick);
            if (env) cycle_log.emplace_back(tick, *env);
            triggers.pop_front();
            armed_tick = -1;
        }
    }

    scheduler.join();
    engine.stop();

    // --- Aggregation ------------------------------------------------------------
    RunReport report;
    const TwinCounters c = twin.counters();
    report.total = twin.history().size();
    report.delivered = c.delivered;
    report.stale = c.stale_discarded;
    report.failed = c.failed;
    report.control_sent = c.control_sent;
    report.control_received = control_received;
    report.reports = c.reports;
    report.malformed = c.malformed;
    report.late_dropped = c.late_dropped;
    report.skew_dropped = c.skew_dropped;

    const auto errs = twin.rssi_error_samples();
    report.rssi_err_samples = errs.size();
    if (!errs.empty()) {
        double acc = 0.0;
        for (double v : errs) acc += v;
        report.rssi_err_mean = acc / static_cast<double>(errs.size());
        report.rssi_err_p95 = quantile(errs, 0.95);
    }
    std::vector<std::pair<int, LatencyBreakdown>> lat_history;
    for (const auto& env : twin.history()) {
        if (env.status() == EnvelopeStatus::delivered) {
            lat_history.emplace_back(env.di_level, env.latency);
        }
    }
    report.latency = latency_report(lat_history);

    // --- Artifacts ------------------------------------------------------------
    if (options.write_outputs && !options.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(options.out_dir);
        const auto out = [&](const std::string& name) {
            const std::string p = (fs::path(options.out_dir) / name).string();
            report.output_files.push_back(p);
            return p;
        };

        {
            std::ofstream f(out("events.ndjson"));
            for (const auto& env : twin.history()) f << envelope_json(env) << "\n";
        }
        {
            std::ofstream f(out("predictions.csv"));
            f << "trigger_tick,target_tick,a,b,rssi_raw_dbm,rssi_corrected_dbm,los,n_paths,"
                 "delay_spread_s\n";
            char line[320];
            for (const auto& [tick, env] : cycle_log) {
                for (std::size_t i = 0; i < env.raw.size(); ++i) {
                    const auto& lp = env.raw[i];
                    const double corr =
                        i < env.corrected.size() ? env.corrected[i].rssi_dbm : lp.rssi_dbm;
                    std::snprintf(line, sizeof line, "%lld,%lld,%s,%s,%.6f,%.6f,%d,%d,%.9e\n",
                                  static_cast<long long>(env.trigger_tick),
                                  static_cast<long long>(env.target_tick), lp.a.c_str(),
                                  lp.b.c_str(), lp.rssi_dbm, corr, lp.los ? 1 : 0, lp.n_paths,
                                  lp.delay_spread_s);
                    f << line;
                }
            }
        }
        {
            std::ofstream f(out("latency.csv"));
            f << latency_report_csv(report.latency);
        }
        {
            std::ofstream f(out("beliefs.json"));
            for (const auto& [id, e] : twin.beliefs_snapshot()) {
                f << belief_json(id, e) << "\n";
            }
        }
        {
            std::ofstream f(out("report.json"));
            f << run_report_json(report);
        }
    }
    return report;
}

std::string run_report_json(const RunReport& r) {
    nlohmann::json j;
    j["envelopes"] = {{"total", r.total},
                      {"delivered", r.delivered},
                      {"stale_discarded", r.stale},
                      {"failed", r.failed}};
    j["accounting_holds"] = r.accounting_holds();
    j["control_sent"] = r.control_sent;
    j["control_received"] = r.control_received;
    j["reports"] = {{"accepted", r.reports},
                    {"malformed", r.malformed},
                    {"late_dropped", r.late_dropped},
                    {"skew_dropped", r.skew_dropped}};
    if (std::isfinite(r.rssi_err_mean)) {
        j["rssi_error_db"] = {{"mean", r.rssi_err_mean},
                              {"p95", r.rssi_err_p95},
                              {"samples", r.rssi_err_samples}};
    } else {
        j["rssi_error_db"] = nullptr;
    }
    auto& lat = j["latency_ms"] = nlohmann::json::array();
    for (const auto& row : r.latency) {
        lat.push_back({{"di", row.di},
                       {"component", row.component},
                       {"count", row.count},
                       {"min", row.min},
                       {"median", row.median},
                       {"p95", row.p95},
                       {"max", row.max}});
    }
    auto& files = j["outputs"] = nlohmann::json::array();
    for (const auto& f : r.output_files) files.push_back(f);
    return j.dump(2);
}

}  // namespace ndtwin
