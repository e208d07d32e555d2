#include "ndtwin/bench.hpp"

#include <cstdio>

#include "ndtwin/latency.hpp"

namespace ndtwin {

BenchResult bench_di(const Scene& assembled_scene, const LinkKey& link,
                     const BenchOptions& options) {
    BenchResult result;
    result.samples.assign(5, {});
    for (int rep = 0; rep < options.repetitions; ++rep) {
        for (int level = 1; level <= 5; ++level) {
            if (options.zero_cost_mock) {
                result.samples[level - 1].push_back(0.0);
                continue;
            }
            const auto res = predict_links(assembled_scene, {link}, di_preset(level),
                                           options.tx_power_dbm, options.seed, options.engine);
            result.samples[level - 1].push_back(res.tau_rt_ms);
        }
    }
    for (int level = 1; level <= 5; ++level) {
        const auto& s = result.samples[level - 1];
        BenchRow row;
        row.di = level;
        row.reps = static_cast<int>(s.size());
        const DetailIndexConfig di = di_preset(level);
        row.nominal_rays = di.rays_per_source;
        row.effective_rays = effective_rays(di, options.engine.rays_cap);
        row.min_ms = quantile(s, 0.0);
        row.median_ms = quantile(s, 0.5);
        row.p95_ms = quantile(s, 0.95);
        row.max_ms = quantile(s, 1.0);
        result.rows.push_back(row);
    }
    result.monotone_medians = true;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (!(result.rows[i].median_ms > result.rows[i - 1].median_ms)) {
            result.monotone_medians = false;
        }
    }
    return result;
}

std::string bench_csv(const BenchResult& result) {
    std::string out = "di,reps,nominal_rays,effective_rays,min_ms,median_ms,p95_ms,max_ms\n";
    char line[256];
    for (const auto& r : result.rows) {
        std::snprintf(line, sizeof line, "%d,%d,%.0f,%d,%.6f,%.6f,%.6f,%.6f\n", r.di, r.reps,
                      r.nominal_rays, r.effective_rays, r.min_ms, r.median_ms, r.p95_ms, r.max_ms);
        out += line;
    }
    return out;
}

}  // namespace ndtwin
