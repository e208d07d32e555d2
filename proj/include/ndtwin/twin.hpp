// Twin orchestrator: report ingestion, prediction cycles, latency accounting,
// deadline enforcement, and control dispatch.
#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ndtwin/channel.hpp"
#include "ndtwin/clock.hpp"
#include "ndtwin/kalman.hpp"
#include "ndtwin/latency.hpp"
#include "ndtwin/udp.hpp"
#include "ndtwin/wire.hpp"

namespace ndtwin {

struct TwinConfig {
    double h_ms = 500.0;      // prediction horizon
    double dt_pe_ms = 100.0;  // entity reporting period
    int di_level = 2;
    double tx_power_dbm = 10.0;
    std::vector<LinkKey> links;
    std::map<std::string, std::string> templates;  // entity -> template, "" = bare antenna
    std::string ego;                               // on_report trigger entity

    enum class Trigger { on_report, periodic };
    Trigger trigger = Trigger::on_report;
    double periodic_ms = 100.0;

    double tau_m_ms = 8.9;     // injected sensing time in simulation
    double skew_bound_ms = 100.0;
    double ewma_alpha = 0.3;
    double deadline_slack_ms = 200.0;  // extra engine wait beyond the deadline
    std::int64_t epoch_us = 0;         // tick 0 reference
    RssiMode mode = RssiMode::coherent;
    std::size_t residual_window = 64;
    KalmanModel kalman = KalmanModel::constant_velocity(0.1);
};

enum class EnvelopeStatus { pending, delivered, stale_discarded, failed };

const char* to_string(EnvelopeStatus s);

struct PredictionEnvelope {
    std::string request_id;
    std::int64_t t_now_us = 0;
    std::int64_t t_target_us = 0;
    std::int64_t completion_us = 0;
    std::int64_t trigger_tick = 0;
    std::int64_t target_tick = 0;
    double h_ms = 0.0;
    int di_level = 0;
    std::map<std::string, Pose> poses_used;
    LatencyBreakdown latency;
    std::vector<LinkPrediction> raw;        // engine output
    std::vector<LinkPrediction> corrected;  // after bias correction

    EnvelopeStatus status() const { return status_; }
    /// pending -> delivered | stale_discarded | failed, irreversible.
    void mark(EnvelopeStatus s);

  private:
    EnvelopeStatus status_ = EnvelopeStatus::pending;
};

/// Delivered iff completion_us <= t_target_us (inclusive boundary).
EnvelopeStatus deadline_check(const PredictionEnvelope& envelope, std::int64_t completion_us);

/// One NDJSON event-log line per envelope.
std::string envelope_json(const PredictionEnvelope& e);

// ---------------------------------------------------------------------------
// Channel engine backends
// ---------------------------------------------------------------------------

struct BackendResult {
    PredictionMsg msg;
    double tau_req_ms = 0.0;  // one-way twin <-> engine latency estimate
};

class ChannelBackend {
  public:
    virtual ~ChannelBackend() = default;
    /// nullopt on failure or timeout past deadline_us.
    virtual std::optional<BackendResult> predict(const PredictRequestMsg& req,
                                                 std::int64_t deadline_us) = 0;
};

/// Computes a prediction request against a static scene (the engine side of
/// the predict/prediction exchange).
PredictionMsg compute_prediction(const Scene& static_scene, const PredictRequestMsg& req,
                                 double tx_power_dbm, std::uint64_t seed,
                                 const EngineOptions& opts);

/// Direct in-process engine (tau_req = 0).
class InProcessEngine final : public ChannelBackend {
  public:
    InProcessEngine(Scene static_scene, double tx_power_dbm, std::uint64_t seed,
                    EngineOptions opts = {});
    std::optional<BackendResult> predict(const PredictRequestMsg& req,
                                         std::int64_t deadline_us) override;

  private:
    Scene scene_;
    double tx_power_dbm_;
    std::uint64_t seed_;
    EngineOptions opts_;
};

/// Test backend: burns a fixed cost on the clock and answers with canned
/// predictions for the requested links.
class MockEngine final : public ChannelBackend {
  public:
    MockEngine(Clock& clock, double cost_ms, double rssi_dbm = -70.0, bool los = true)
        : clock_(clock), cost_ms_(cost_ms), rssi_dbm_(rssi_dbm), los_(los) {}
    std::optional<BackendResult> predict(const PredictRequestMsg& req,
                                         std::int64_t deadline_us) override;
    void set_cost_ms(double c) { cost_ms_ = c; }
    void set_tau_req_ms(double t) { tau_req_ms_ = t; }
    void fail_next(int n) { fail_next_ = n; }

  private:
    Clock& clock_;
    double cost_ms_;
    double rssi_dbm_;
    bool los_;
    double tau_req_ms_ = 0.0;
    int fail_next_ = 0;
};

/// UDP client side of the predict/prediction exchange; tau_req is estimated
/// as half of (round trip - engine compute), mirroring RTT-based probing.
class UdpEngineBackend final : public ChannelBackend {
  public:
    explicit UdpEngineBackend(Endpoint engine, Clock& clock);
    std::optional<BackendResult> predict(const PredictRequestMsg& req,
                                         std::int64_t deadline_us) override;

  private:
    Endpoint engine_;
    Clock& clock_;
    UdpSocket socket_;
};

/// UDP server wrapping the in-process engine on its own thread.
class EngineServer {
  public:
    EngineServer(Scene static_scene, double tx_power_dbm, std::uint64_t seed,
                 EngineOptions opts = {});
    ~EngineServer();
    void start();
    void stop();
    Endpoint endpoint() const { return endpoint_; }

  private:
    void run();

    Scene scene_;
    double tx_power_dbm_;
    std::uint64_t seed_;
    EngineOptions opts_;
    UdpSocket socket_;
    Endpoint endpoint_;
    std::thread thread_;
    std::atomic<bool> stop_{false};
};

// ---------------------------------------------------------------------------
// Twin
// ---------------------------------------------------------------------------

class ControlSink {
  public:
    virtual ~ControlSink() = default;
    virtual void send_control(const std::string& entity_id, const ControlMsg& msg) = 0;
};

struct TwinCounters {
    std::uint64_t reports = 0;
    std::uint64_t malformed = 0;
    std::uint64_t skew_dropped = 0;
    std::uint64_t late_dropped = 0;
    std::uint64_t delivered = 0;
    std::uint64_t stale_discarded = 0;
    std::uint64_t failed = 0;
    std::uint64_t control_sent = 0;
};

class Twin {
  public:
    Twin(TwinConfig cfg, Clock& clock, ChannelBackend& backend, ControlSink* sink = nullptr);

    /// Full ingest path: parse, validate, track. Returns the report when it
    /// was accepted into the tracker.
    std::optional<ReportMsg> ingest_datagram(std::string_view bytes);
    bool ingest_report(const ReportMsg& report);

    /// One prediction cycle targeting trigger_tick's time plus the horizon.
    /// Requires at least one tracked entity. Thread-safe against ingestion.
    std::optional<PredictionEnvelope> run_cycle(std::int64_t trigger_tick);

    TwinCounters counters() const;
    const std::vector<PredictionEnvelope>& history() const { return history_; }
    const TwinConfig& config() const { return cfg_; }

    /// Highest tick ingested per entity (-1 before the first report).
    std::int64_t last_tick(const std::string& entity) const;
    std::size_t tracked_entities() const;

    /// abs(measured - corrected prediction) samples matched by tick.
    std::vector<double> rssi_error_samples() const;
    std::map<std::string, TrackedEntity> beliefs_snapshot() const;

  private:
    struct EntityTrack {
        std::int64_t last_t_meas_us = std::numeric_limits<std::int64_t>::min();
        std::int64_t last_tick = -1;
        double last_z = 0.0;
        double last_wire_ms = 0.0;
        bool seen = false;
    };

    std::int64_t tick_of(std::int64_t t_us) const;

    TwinConfig cfg_;
    Clock& clock_;
    ChannelBackend& backend_;
    ControlSink* sink_;

    mutable std::mutex mutex_;
    std::map<std::string, EntityTrack> tracks_;
    std::map<std::string, TrackedEntity> kf_;
    std::vector<std::pair<std::int64_t, Measurement>> batch_;  // (tick, measurement)
    std::map<LinkKey, std::deque<double>> residuals_;
    std::map<std::int64_t, std::map<LinkKey, std::pair<double, double>>> pred_by_tick_;
    std::vector<double> rssi_errors_;
    TwinCounters counters_;
    std::vector<PredictionEnvelope> history_;
    std::uint64_t seq_ = 0;
};

}  // namespace ndtwin
