#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ndtwin/latency.hpp"

using namespace ndtwin;

TEST_CASE("component sum double-counts the two communication legs") {
    // One breakdown with the measured fixed components and a zero-cost engine.
    LatencyBreakdown lb{8.9, 1.1, 4.4, 0.6, 0.0, 0.0};
    lb.tau_e2e_ms = lb.component_sum_ms();
    CHECK(lb.tau_e2e_ms == doctest::Approx(16.7).epsilon(1e-12));
    CHECK(lb.identity_holds(1e-9));

    lb.tau_e2e_ms += 0.5;
    CHECK(lb.identity_holds(1.0));
    lb.tau_e2e_ms += 1.0;
    CHECK(!lb.identity_holds(1.0));
}

TEST_CASE("p95 matches a direct sort oracle") {
    std::mt19937_64 rng(5);
    std::vector<double> values;
    for (int i = 0; i < 100; ++i) values.push_back(test::uniform(rng, 0, 50));

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double oracle95 = sorted[static_cast<std::size_t>(std::ceil(0.95 * 100)) - 1];
    const double oracle50 = sorted[static_cast<std::size_t>(std::ceil(0.50 * 100)) - 1];
    CHECK(quantile(values, 0.95) == oracle95);
    CHECK(quantile(values, 0.5) == oracle50);
    CHECK(quantile(values, 1.0) == sorted.back());
}

TEST_CASE("latency report: one row group per DI, empty history is empty") {
    CHECK(latency_report({}).empty());

    std::vector<std::pair<int, LatencyBreakdown>> history;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 40; ++i) {
        LatencyBreakdown lb{8.9, 1.1, 4.4, 0.6, test::uniform(rng, 0, 20), 0.0};
        lb.tau_e2e_ms = lb.component_sum_ms();
        history.emplace_back(i % 2 ? 2 : 1, lb);
    }
    const auto rows = latency_report(history);
    CHECK(rows.size() == 12);  // 2 DI levels x 6 components
    int di1 = 0, di2 = 0;
    for (const auto& r : rows) {
        CHECK(r.count == 20);
        CHECK(r.min <= r.median);
        CHECK(r.median <= r.p95);
        CHECK(r.p95 <= r.max);
        (r.di == 1 ? di1 : di2)++;
    }
    CHECK(di1 == 6);
    CHECK(di2 == 6);

    // tau_e2e quantiles against the direct oracle.
    std::vector<double> e2e_di1;
    for (const auto& [di, lb] : history) {
        if (di == 1) e2e_di1.push_back(lb.tau_e2e_ms);
    }
    std::sort(e2e_di1.begin(), e2e_di1.end());
    for (const auto& r : rows) {
        if (r.di == 1 && r.component == "tau_e2e") {
            CHECK(r.p95 == e2e_di1[static_cast<std::size_t>(std::ceil(0.95 * 20)) - 1]);
            CHECK(r.max == e2e_di1.back());
        }
    }

    const std::string csv = latency_report_csv(rows);
    CHECK(csv.find("di,component,count,min_ms,median_ms,p95_ms,max_ms") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}
