// ndtwin CLI: scenario replay, one-shot prediction, DI latency benchmark,
// and the perturbation sweep.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ndtwin/bench.hpp"
#include "ndtwin/errors.hpp"
#include "ndtwin/replay.hpp"
#include "ndtwin/scenario.hpp"
#include "ndtwin/sweep.hpp"
#include "ndtwin/twin.hpp"

namespace fs = std::filesystem;
using namespace ndtwin;

namespace {

// Tracks files created by the running command so a failure removes partial
// outputs before exiting.
struct OutputTracker {
    std::vector<std::string> files;
    bool keep = false;

    std::string write(const fs::path& path, const std::string& content) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path);
        f << content;
        files.push_back(path.string());
        return path.string();
    }
    ~OutputTracker() {
        if (keep) return;
        for (const auto& f : files) {
            std::error_code ec;
            fs::remove(f, ec);
        }
    }
};

struct PoseFileEntry {
    std::string id, tpl;
    Pose pose;
};

std::vector<PoseFileEntry> load_poses_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open poses file \"" + path + "\"");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    std::vector<PoseFileEntry> out;
    const nlohmann::json& arr = j.is_array() ? j : j.at("poses");
    for (const auto& p : arr) {
        PoseFileEntry e;
        e.id = p.at("id").get<std::string>();
        e.tpl = p.value("template", std::string());
        e.pose = Pose(Vec3(p.at("x").get<double>(), p.at("y").get<double>(), p.value("z", 0.0)),
                      p.value("yaw", 0.0));
        out.push_back(std::move(e));
    }
    if (out.empty()) throw ValidationError(path + ": no poses");
    return out;
}

std::vector<LinkKey> parse_links_flag(const std::string& spec) {
    std::vector<LinkKey> links;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ValidationError("link \"" + item + "\" must look like a:b");
        }
        links.emplace_back(item.substr(0, colon), item.substr(colon + 1));
    }
    if (links.empty()) throw ValidationError("no links given");
    return links;
}

Scene assemble_from_pose_file(const Scene& base, const std::vector<PoseFileEntry>& entries) {
    std::map<std::string, Pose> poses;
    std::map<std::string, std::string> templates;
    for (const auto& e : entries) {
        poses[e.id] = e.pose;
        if (!e.tpl.empty()) templates[e.id] = e.tpl;
    }
    return assemble_scene(base, poses, templates);
}

std::string manifest_json(const std::string& command, const nlohmann::json& args,
                          const std::vector<std::string>& outputs,
                          const nlohmann::json& measured) {
    nlohmann::json j;
    j["command"] = command;
    j["args"] = args;
    j["outputs"] = outputs;
    j["measured"] = measured;  // wall-clock values, excluded from reproducibility
    return j.dump(2);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive V2X network twin: ray-traced channel prediction over a "
                 "Kalman-tracked scene with a latency-audited UDP loop"};
    app.require_subcommand(1);

    // Shared flags (each subcommand binds the ones it uses).
    std::string scene_path, scenario_path, poses_path, links_flag, out_dir, k_grid_flag;
    std::uint64_t seed = 0;
    int di = 0;
    double h_ms = -1, dt_pe_ms = -1, duration_s = -1, tx_power_dbm = 10.0;
    double rays_cap = 1e6, drop_rate = 0.0, eps_max = 1.0, t0 = -1, t1 = -1;
    int reps = 5, samples = 25, instants = 60, edge_samples = 32;
    bool incoherent = false, assert_monotone = false, mock_engine = false, emit_paths = false;
    std::string blocker_id;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "deterministic seed")->envname("NDTWIN_SEED");
        cmd->add_option("--out-dir", out_dir, "artifact directory")->envname("NDTWIN_OUT_DIR");
        cmd->add_flag("--incoherent", incoherent,
                      "incoherent power sum instead of the coherent default")
            ->envname("NDTWIN_INCOHERENT");
        cmd->add_option("--rays-cap", rays_cap, "effective ray cap per source")
            ->envname("NDTWIN_RAYS_CAP");
    };

    CLI::App* replay = app.add_subcommand("replay", "closed-loop scenario replay over UDP");
    replay->add_option("--scenario", scenario_path, "scenario JSON")
        ->required()
        ->envname("NDTWIN_SCENARIO");
    replay->add_option("--di", di, "detail index override")->envname("NDTWIN_DI");
    replay->add_option("--h-ms", h_ms, "horizon override, ms")->envname("NDTWIN_H_MS");
    replay->add_option("--dt-pe-ms", dt_pe_ms, "reporting period override, ms")
        ->envname("NDTWIN_DT_PE_MS");
    replay->add_option("--duration-s", duration_s, "duration override, s")
        ->envname("NDTWIN_DURATION_S");
    replay->add_option("--drop-rate", drop_rate, "fraction of entity reports suppressed");
    add_common(replay);

    CLI::App* predict = app.add_subcommand("predict", "one-shot channel prediction");
    predict->add_option("--scene", scene_path, "scene JSON")->required()->envname("NDTWIN_SCENE");
    predict->add_option("--poses", poses_path, "poses JSON")->required()
        ->envname("NDTWIN_POSES");
    predict->add_option("--links", links_flag, "links a:b[,c:d...]")->required();
    predict->add_option("--di", di, "detail index (1..5)")->envname("NDTWIN_DI");
    predict->add_option("--tx-power-dbm", tx_power_dbm, "transmit power");
    predict->add_flag("--paths-csv", emit_paths, "also dump per-path CSVs");
    add_common(predict);

    CLI::App* bench = app.add_subcommand("bench-di", "wall-clock benchmark across DI1..DI5");
    bench->add_option("--scene", scene_path, "scene JSON")->required()->envname("NDTWIN_SCENE");
    bench->add_option("--poses", poses_path, "poses JSON")->required();
    bench->add_option("--links", links_flag, "benchmark link a:b")->required();
    bench->add_option("--reps", reps, "repetitions per DI");
    bench->add_option("--edge-samples", edge_samples, "knife-edge samples per patch edge");
    bench->add_flag("--assert-monotone", assert_monotone, "exit 2 unless medians increase");
    bench->add_flag("--mock", mock_engine, "zero-cost sanity mode");
    add_common(bench);

    CLI::App* sweepk = app.add_subcommand("sweep-k", "perturbation sweep (RMSE_k / eta_k)");
    sweepk->add_option("--scenario", scenario_path, "scenario JSON")
        ->required()
        ->envname("NDTWIN_SCENARIO");
    sweepk->add_option("--k-grid", k_grid_flag, "comma-separated k values (default 0..1/0.05)");
    sweepk->add_option("--samples", samples, "samples per k");
    sweepk->add_option("--eps-max", eps_max, "maximum displacement, m");
    sweepk->add_option("--instants", instants, "trajectory evaluation instants");
    sweepk->add_option("--t0", t0, "trajectory window start, s");
    sweepk->add_option("--t1", t1, "trajectory window end, s");
    sweepk->add_option("--blocker", blocker_id, "perturbed entity (default: the moving one)");
    sweepk->add_option("--di", di, "detail index override")->envname("NDTWIN_DI");
    add_common(sweepk);

    CLI11_PARSE(app, argc, argv);

    OutputTracker outputs;
    try {
        const RssiMode mode = incoherent ? RssiMode::incoherent : RssiMode::coherent;

        if (*replay) {
            Scenario sc = load_scenario(scenario_path);
            ReplayOptions opts;
            opts.seed = seed;
            opts.rays_cap = rays_cap;
            opts.mode = mode;
            opts.drop_rate = drop_rate;
            if (di > 0) opts.di = di;
            if (h_ms > 0) opts.h_ms = h_ms;
            if (dt_pe_ms > 0) opts.dt_pe_ms = dt_pe_ms;
            if (duration_s >= 0) opts.duration_s = duration_s;
            opts.out_dir = out_dir;
            opts.write_outputs = !out_dir.empty();
            const RunReport report = run_replay(sc, opts);
            for (const auto& f : report.output_files) outputs.files.push_back(f);
            if (!out_dir.empty()) {
                nlohmann::json args{{"scenario", scenario_path}, {"seed", seed},
                                    {"mode", to_string(mode)}};
                outputs.write(fs::path(out_dir) / "manifest.json",
                              manifest_json("replay", args, outputs.files,
                                            {{"note", "latency.csv and events.ndjson carry "
                                                      "wall-clock fields"}}));
            }
            std::cout << run_report_json(report) << "\n";
            if (!report.accounting_holds()) throw std::runtime_error("envelope accounting broken");
            outputs.keep = true;
            return 0;
        }

        if (*predict) {
            if (di <= 0) di = 1;
            const Scene base = load_scene(scene_path);
            const auto entries = load_poses_file(poses_path);
            const Scene assembled = assemble_from_pose_file(base, entries);
            const auto links = parse_links_flag(links_flag);
            EngineOptions eopts;
            eopts.rays_cap = rays_cap;
            eopts.mode = mode;
            const auto res =
                predict_links(assembled, links, di_preset(di), tx_power_dbm, seed, eopts);

            nlohmann::json records = nlohmann::json::array();
            for (const auto& [key, c] : res.links) {
                auto rec = nlohmann::json::parse(channel_record_json(c, di, res.tau_rt_ms, mode));
                std::cout << rec.dump() << "\n";
                rec.erase("tau_rt_ms");  // measured field lives in the manifest
                records.push_back(std::move(rec));
            }
            if (!out_dir.empty()) {
                outputs.write(fs::path(out_dir) / "predict.json", records.dump(2) + "\n");
                if (emit_paths) {
                    for (const auto& [key, c] : res.links) {
                        outputs.write(fs::path(out_dir) /
                                          ("paths_" + key.first + "_" + key.second + ".csv"),
                                      paths_csv(c.paths));
                    }
                }
                nlohmann::json args{{"scene", scene_path}, {"poses", poses_path},
                                    {"di", di},           {"seed", seed},
                                    {"mode", to_string(mode)}};
                outputs.write(fs::path(out_dir) / "manifest.json",
                              manifest_json("predict", args, outputs.files,
                                            {{"tau_rt_ms", res.tau_rt_ms}}));
            }
            outputs.keep = true;
            return 0;
        }

        if (*bench) {
            const Scene base = load_scene(scene_path);
            const Scene assembled = assemble_from_pose_file(base, load_poses_file(poses_path));
            const auto links = parse_links_flag(links_flag);
            BenchOptions bopts;
            bopts.repetitions = reps;
            bopts.seed = seed;
            bopts.tx_power_dbm = tx_power_dbm;
            bopts.engine.rays_cap = rays_cap;
            bopts.engine.mode = mode;
            bopts.engine.edge_samples = edge_samples;
            bopts.zero_cost_mock = mock_engine;
            const BenchResult result = bench_di(assembled, links.front(), bopts);
            std::cout << bench_csv(result);
            std::cout << "monotone_medians=" << (result.monotone_medians ? "true" : "false")
                      << "\n";
            if (!out_dir.empty()) {
                outputs.write(fs::path(out_dir) / "bench_di.csv", bench_csv(result));
                nlohmann::json args{{"scene", scene_path},  {"reps", reps},
                                    {"rays_cap", rays_cap}, {"seed", seed}};
                outputs.write(
                    fs::path(out_dir) / "manifest.json",
                    manifest_json("bench-di", args, outputs.files,
                                  {{"note", "all *_ms columns are measured wall-clock"}}));
            }
            outputs.keep = true;
            if (assert_monotone && !result.monotone_medians) return 2;
            return 0;
        }

        if (*sweepk) {
            const Scenario sc = load_scenario(scenario_path);
            SweepScenario ssc;
            ssc.static_scene = sc.scene;
            for (const auto& e : sc.entities) {
                if (!e.tpl.empty()) ssc.templates[e.id] = e.tpl;
                if (e.is_static) {
                    ssc.static_poses[e.id] = e.static_pose;
                } else if (blocker_id.empty() || blocker_id == e.id) {
                    ssc.blocker_id = e.id;
                }
            }
            if (ssc.blocker_id.empty()) {
                throw ValidationError("no moving blocker entity in the scenario");
            }
            const EntitySpec* blocker = sc.entity(ssc.blocker_id);
            const double w0 = t0 >= 0 ? t0 : blocker->trajectory.front().t;
            const double w1 = t1 >= 0 ? t1 : blocker->trajectory.back().t;
            for (int i = 0; i < instants; ++i) {
                const double t = w0 + (w1 - w0) * (instants > 1 ? i / double(instants - 1) : 0.0);
                ssc.trajectory.emplace_back(t, scenario_pose(*blocker, t));
            }
            ssc.link = sc.links.front();

            SweepConfig cfg;
            cfg.samples_per_k = samples;
            cfg.eps_max = eps_max;
            cfg.seed = seed;
            cfg.di_level = di > 0 ? di : sc.di;
            cfg.tx_power_dbm = sc.tx_power_dbm;
            cfg.engine.rays_cap = rays_cap;
            cfg.engine.mode = mode;
            if (!k_grid_flag.empty()) {
                std::stringstream ss(k_grid_flag);
                std::string item;
                while (std::getline(ss, item, ',')) cfg.k_grid.push_back(std::stod(item));
            }
            const SweepResult result = sweep(ssc, cfg);
            if (!result.transition_found) {
                std::cerr << "warning: trajectory causes no LoS transition on the link\n";
            }
            std::cout << sweep_csv(result);
            if (!out_dir.empty()) {
                outputs.write(fs::path(out_dir) / "sweep_k.csv", sweep_csv(result));
                outputs.write(fs::path(out_dir) / "sweep_k_meta.json",
                              sweep_metadata_json(ssc, cfg, result) + "\n");
                nlohmann::json args{{"scenario", scenario_path}, {"seed", seed},
                                    {"samples", samples},        {"di", cfg.di_level}};
                outputs.write(fs::path(out_dir) / "manifest.json",
                              manifest_json("sweep-k", args, outputs.files, {}));
            }
            outputs.keep = true;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
