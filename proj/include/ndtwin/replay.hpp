// Scenario replay over UDP loopback: simulated entities, engine endpoint,
// and the twin loop, with CSV/JSON artifacts.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ndtwin/latency.hpp"
#include "ndtwin/scenario.hpp"

namespace ndtwin {

struct ReplayOptions {
    std::string out_dir;
    std::uint64_t seed = 0;
    std::optional<double> duration_s;  // overrides the scenario when set
    std::optional<int> di;
    std::optional<double> h_ms;
    std::optional<double> dt_pe_ms;
    double drop_rate = 0.0;  // fraction of entity reports suppressed (loss injection)
    double rays_cap = 1e6;
    RssiMode mode = RssiMode::coherent;
    bool write_outputs = true;
};

struct RunReport {
    std::uint64_t total = 0;
    std::uint64_t delivered = 0;
    std::uint64_t stale = 0;
    std::uint64_t failed = 0;
    std::uint64_t control_sent = 0;
    std::uint64_t control_received = 0;
    std::uint64_t reports = 0;
    std::uint64_t malformed = 0;
    std::uint64_t late_dropped = 0;
    std::uint64_t skew_dropped = 0;
    double rssi_err_mean = std::numeric_limits<double>::quiet_NaN();
    double rssi_err_p95 = std::numeric_limits<double>::quiet_NaN();
    std::size_t rssi_err_samples = 0;
    std::vector<LatencySummaryRow> latency;
    std::vector<std::string> output_files;

    bool accounting_holds() const { return delivered + stale + failed == total; }
};

/// Runs the closed loop for the scenario duration. Deterministic per seed up
/// to wall-clock timing fields.
RunReport run_replay(const Scenario& scenario, const ReplayOptions& options);

std::string run_report_json(const RunReport& report);

}  // namespace ndtwin
