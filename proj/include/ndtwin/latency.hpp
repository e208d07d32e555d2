// End-to-end latency accounting and per-DI distribution summaries.
#pragma once

#include <string>
#include <vector>

namespace ndtwin {

/// Latency components in milliseconds. The loop crosses the access link and
/// the engine link twice each, so tau_w and tau_req are double-counted in the
/// end-to-end sum.
struct LatencyBreakdown {
    double tau_m_ms = 0.0;    // measurement acquisition
    double tau_w_ms = 0.0;    // entity <-> twin link, one way
    double tau_tp_ms = 0.0;   // trajectory prediction
    double tau_req_ms = 0.0;  // twin <-> engine link, one way
    double tau_rt_ms = 0.0;   // channel computation
    double tau_e2e_ms = 0.0;  // recorded total

    double component_sum_ms() const {
        return tau_m_ms + 2.0 * tau_w_ms + tau_tp_ms + 2.0 * tau_req_ms + tau_rt_ms;
    }
    bool identity_holds(double tol_ms = 1.0) const;
};

/// Nearest-rank quantile of an unsorted sample (q in [0, 1]).
double quantile(std::vector<double> values, double q);

struct LatencySummaryRow {
    int di = 0;
    std::string component;  // tau_m .. tau_rt, tau_e2e
    std::size_t count = 0;
    double min = 0.0, median = 0.0, p95 = 0.0, max = 0.0;
};

/// Per-DI min/median/p95/max of every component and of tau_e2e; empty input
/// gives an empty report. Rows ordered by (di, component).
std::vector<LatencySummaryRow> latency_report(
    const std::vector<std::pair<int, LatencyBreakdown>>& history);

std::string latency_report_csv(const std::vector<LatencySummaryRow>& rows);

}  // namespace ndtwin
