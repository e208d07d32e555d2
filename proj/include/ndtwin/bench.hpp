// Wall-clock channel-computation benchmark across the DI ladder.
#pragma once

#include <string>
#include <vector>

#include "ndtwin/channel.hpp"

namespace ndtwin {

struct BenchOptions {
    int repetitions = 5;
    std::uint64_t seed = 0;
    double tx_power_dbm = 10.0;
    EngineOptions engine;
    bool zero_cost_mock = false;  // sanity mode: skip the engine, record ~0
};

struct BenchRow {
    int di = 0;
    int reps = 0;
    double nominal_rays = 0.0;
    int effective_rays = 0;
    double min_ms = 0.0, median_ms = 0.0, p95_ms = 0.0, max_ms = 0.0;
};

struct BenchResult {
    std::vector<BenchRow> rows;       // DI1..DI5
    bool monotone_medians = false;    // strictly increasing across the ladder
    std::vector<std::vector<double>> samples;  // [di-1][rep]
};

/// Repetitions are interleaved round-robin across DI levels so slow drift
/// hits every level equally.
BenchResult bench_di(const Scene& assembled_scene, const LinkKey& link,
                     const BenchOptions& options);

std::string bench_csv(const BenchResult& result);

}  // namespace ndtwin
