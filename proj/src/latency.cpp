#include "ndtwin/latency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace ndtwin {

bool LatencyBreakdown::identity_holds(double tol_ms) const {
    return std::abs(tau_e2e_ms - component_sum_ms()) <= tol_ms;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double rank = q * static_cast<double>(values.size());
    std::size_t idx = static_cast<std::size_t>(std::ceil(rank));
    if (idx > 0) --idx;
    if (idx >= values.size()) idx = values.size() - 1;
    return values[idx];
}

std::vector<LatencySummaryRow> latency_report(
    const std::vector<std::pair<int, LatencyBreakdown>>& history) {
    std::map<int, std::vector<LatencyBreakdown>> by_di;
    for (const auto& [di, lb] : history) by_di[di].push_back(lb);

    const std::pair<const char*, double LatencyBreakdown::*> components[] = {
        {"tau_m", &LatencyBreakdown::tau_m_ms},     {"tau_w", &LatencyBreakdown::tau_w_ms},
        {"tau_tp", &LatencyBreakdown::tau_tp_ms},   {"tau_req", &LatencyBreakdown::tau_req_ms},
        {"tau_rt", &LatencyBreakdown::tau_rt_ms},   {"tau_e2e", &LatencyBreakdown::tau_e2e_ms},
    };

    std::vector<LatencySummaryRow> rows;
    for (const auto& [di, list] : by_di) {
        for (const auto& [name, member] : components) {
            std::vector<double> values;
            values.reserve(list.size());
            for (const auto& lb : list) values.push_back(lb.*member);
            LatencySummaryRow row;
            row.di = di;
            row.component = name;
            row.count = values.size();
            row.min = *std::min_element(values.begin(), values.end());
            row.max = *std::max_element(values.begin(), values.end());
            row.median = quantile(values, 0.5);
            row.p95 = quantile(values, 0.95);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string latency_report_csv(const std::vector<LatencySummaryRow>& rows) {
    std::string out = "di,component,count,min_ms,median_ms,p95_ms,max_ms\n";
    char line[200];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%d,%s,%zu,%.6f,%.6f,%.6f,%.6f\n", r.di,
                      r.component.c_str(), r.count, r.min, r.median, r.p95, r.max);
        out += line;
    }
    return out;
}

}  // namespace ndtwin
